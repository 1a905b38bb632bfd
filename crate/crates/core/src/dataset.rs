//! Curve data container, CSV ingestion and the synthetic curve generator.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A set of `n` curves sampled on one shared, strictly increasing grid of
/// `m` time points. Ground-truth cluster labels are optional and kept as the
/// raw integers found in the source (the generator emits `1..=K`).
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet<F> {
    values: Array2<F>,
    grid: Vec<F>,
    labels: Option<Vec<u32>>,
}

impl<F: Scalar> CurveSet<F> {
    pub fn new(values: Array2<F>, grid: Vec<F>, labels: Option<Vec<u32>>) -> Result<Self> {
        let (n, m) = values.dim();
        if n < 1 {
            return Err(Error::InvalidData("need at least one curve".into()));
        }
        if m < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 time points, got {m}"
            )));
        }
        if grid.len() != m {
            return Err(Error::InvalidData(format!(
                "grid length {} does not match {} columns",
                grid.len(),
                m
            )));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidData(
                "grid must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) || grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite entries".into()));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::InvalidData(format!(
                    "label count {} does not match {} curves",
                    labels.len(),
                    n
                )));
            }
        }
        Ok(Self {
            values,
            grid,
            labels,
        })
    }

    /// Default 1-based index grid `1, 2, ..., m`.
    pub fn with_default_grid(values: Array2<F>, labels: Option<Vec<u32>>) -> Result<Self> {
        let m = values.dim().1;
        let grid = (1..=m).map(F::from_count).collect();
        Self::new(values, grid, labels)
    }

    pub fn n(&self) -> usize {
        self.values.dim().0
    }

    pub fn m(&self) -> usize {
        self.values.dim().1
    }

    pub fn values(&self) -> &Array2<F> {
        &self.values
    }

    pub fn grid(&self) -> &[F] {
        &self.grid
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn curve(&self, i: usize) -> ArrayView1<'_, F> {
        self.values.row(i)
    }

    /// Population variance of all `n * m` observations.
    pub fn global_variance(&self) -> F {
        let count = F::from_count(self.values.len());
        let mean = self.values.iter().copied().sum::<F>() / count;
        self.values
            .iter()
            .map(|&v| (v - mean) * (v - mean))
            .sum::<F>()
            / count
    }

    /// Lower bound applied to every fitted noise variance: `1e-8` times the
    /// global variance (or `1e-8` outright for constant data). Keeps
    /// `log sigma^2` finite on noiseless segments.
    pub fn variance_floor(&self) -> F {
        let gvar = self.global_variance();
        let unit = if gvar > F::zero() { gvar } else { F::one() };
        F::cast(1e-8) * unit
    }
}

/// Declares how a curve CSV file is laid out.
///
/// * `grid_header`: first row is `#grid,t1,...,tm`.
/// * `label_column`: first column of every data row is an integer label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvLayout {
    pub grid_header: bool,
    pub label_column: bool,
}

impl CsvLayout {
    /// Plain numeric matrix, one curve per row.
    pub fn bare() -> Self {
        Self {
            grid_header: false,
            label_column: false,
        }
    }

    /// Layout written by the generator: grid header plus label column.
    pub fn labeled() -> Self {
        Self {
            grid_header: true,
            label_column: true,
        }
    }

    /// Guesses the layout of an existing file: a `#grid` header is
    /// self-announcing, a label column is assumed when every first cell of
    /// the data rows parses as a small non-negative integer.
    pub fn sniff(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let first = lines.next().unwrap_or("");
        let grid_header = first.starts_with("#grid");
        let mut data_lines: Vec<&str> = Vec::new();
        if !grid_header {
            data_lines.push(first);
        }
        data_lines.extend(lines);
        let label_column = !data_lines.is_empty()
            && data_lines.iter().all(|l| {
                l.split(',')
                    .next()
                    .map(|c| {
                        c.trim()
                            .parse::<u32>()
                            .map(|v| v < 100_000)
                            .unwrap_or(false)
                    })
                    .unwrap_or(false)
            });
        Ok(Self {
            grid_header,
            label_column,
        })
    }
}

/// Reads a curve set from `path` according to `layout`.
pub fn load_csv<F: Scalar>(path: &Path, layout: CsvLayout) -> Result<CurveSet<F>> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, layout)
}

pub(crate) fn parse_csv<F: Scalar>(text: &str, layout: CsvLayout) -> Result<CurveSet<F>> {
    let mut rows: Vec<Vec<F>> = Vec::new();
    let mut labels: Vec<u32> = Vec::new();
    let mut grid: Option<Vec<F>> = None;
    let mut width: Option<usize> = None;

    for (row_idx, line) in text.lines().enumerate() {
        let row = row_idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if row == 1 && layout.grid_header {
            if cells.first().map(|c| c.trim()) != Some("#grid") {
                return Err(Error::Parse {
                    row,
                    col: 1,
                    message: "expected '#grid' header cell".into(),
                });
            }
            let mut g = Vec::with_capacity(cells.len() - 1);
            for (j, cell) in cells.iter().enumerate().skip(1) {
                g.push(parse_cell(cell, row, j + 1)?);
            }
            grid = Some(g);
            continue;
        }
        let mut cells = cells.into_iter().enumerate();
        if layout.label_column {
            let (j, cell) = cells.next().ok_or_else(|| Error::Parse {
                row,
                col: 1,
                message: "empty row".into(),
            })?;
            let label = cell.trim().parse::<u32>().map_err(|_| Error::Parse {
                row,
                col: j + 1,
                message: format!("invalid label '{}'", cell.trim()),
            })?;
            labels.push(label);
        }
        let mut data = Vec::new();
        for (j, cell) in cells {
            data.push(parse_cell(cell, row, j + 1)?);
        }
        match width {
            None => width = Some(data.len()),
            Some(w) if w != data.len() => {
                return Err(Error::Parse {
                    row,
                    col: data.len().min(w) + 1,
                    message: format!("ragged row: expected {} value cells, got {}", w, data.len()),
                });
            }
            _ => {}
        }
        rows.push(data);
    }

    let n = rows.len();
    let m = width.unwrap_or(0);
    if n == 0 || m < 2 {
        return Err(Error::InvalidData(format!(
            "need an n x m matrix with m >= 2, got {n} x {m}"
        )));
    }
    if let Some(g) = &grid {
        if g.len() != m {
            return Err(Error::InvalidData(format!(
                "grid header has {} points but rows have {} values",
                g.len(),
                m
            )));
        }
    }
    let flat: Vec<F> = rows.into_iter().flatten().collect();
    let values = Array2::from_shape_vec((n, m), flat).expect("shape checked above");
    let labels = if layout.label_column {
        Some(labels)
    } else {
        None
    };
    match grid {
        Some(g) => CurveSet::new(values, g, labels),
        None => CurveSet::with_default_grid(values, labels),
    }
}

fn parse_cell<F: Scalar>(cell: &str, row: usize, col: usize) -> Result<F> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        row,
        col,
        message: format!("invalid number '{}'", cell.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            col,
            message: format!("non-finite value '{}'", cell.trim()),
        });
    }
    Ok(F::cast(v))
}

/// Renders a curve set in the CSV format understood by [`load_csv`].
pub fn format_csv<F: Scalar>(curves: &CurveSet<F>, layout: CsvLayout) -> String {
    let mut out = String::new();
    if layout.grid_header {
        out.push_str("#grid");
        for t in curves.grid() {
            let _ = write!(out, ",{t}");
        }
        out.push('\n');
    }
    for i in 0..curves.n() {
        let mut first = true;
        if layout.label_column {
            let label = curves.labels().map(|l| l[i]).unwrap_or(0);
            let _ = write!(out, "{label}");
            first = false;
        }
        for v in curves.curve(i) {
            if first {
                let _ = write!(out, "{v}");
                first = false;
            } else {
                let _ = write!(out, ",{v}");
            }
        }
        out.push('\n');
    }
    out
}

/// Writes a curve set to `path`; see [`format_csv`].
pub fn save_csv<F: Scalar>(curves: &CurveSet<F>, path: &Path, layout: CsvLayout) -> Result<()> {
    std::fs::write(path, format_csv(curves, layout))?;
    Ok(())
}

/// Mean function of one regime, evaluated on the raw 1-based time index `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegimeMean<F> {
    Constant(F),
    /// `slope * j + intercept`.
    Linear { slope: F, intercept: F },
}

impl<F: Scalar> RegimeMean<F> {
    pub fn eval(&self, j: usize) -> F {
        match *self {
            RegimeMean::Constant(c) => c,
            RegimeMean::Linear { slope, intercept } => slope * F::from_count(j) + intercept,
        }
    }
}

/// Generating description of one cluster: segment boundaries (0-based, from
/// 0 to `m`), one mean function and one noise standard deviation per regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec<F> {
    pub boundaries: Vec<usize>,
    pub means: Vec<RegimeMean<F>>,
    pub noise_sd: Vec<F>,
}

/// Full description of a synthetic curve set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec<F> {
    pub n: usize,
    pub m: usize,
    pub mixing: Vec<F>,
    pub clusters: Vec<ClusterSpec<F>>,
    pub seed: u64,
}

impl<F: Scalar> SimulationSpec<F> {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidData("n must be >= 1".into()));
        }
        if self.m < 2 {
            return Err(Error::InvalidData("m must be >= 2".into()));
        }
        if self.mixing.len() != self.clusters.len() || self.clusters.is_empty() {
            return Err(Error::InvalidData(
                "mixing and cluster specs must be non-empty and of equal length".into(),
            ));
        }
        let total: F = self.mixing.iter().copied().sum();
        if (total - F::one()).abs() > F::cast(1e-12) {
            return Err(Error::InvalidData(format!(
                "mixing proportions sum to {total}, expected 1"
            )));
        }
        if self.mixing.iter().any(|&a| a < F::zero()) {
            return Err(Error::InvalidData(
                "mixing proportions must be non-negative".into(),
            ));
        }
        for (k, cluster) in self.clusters.iter().enumerate() {
            let b = &cluster.boundaries;
            if b.first() != Some(&0) || b.last() != Some(&self.m) {
                return Err(Error::InvalidData(format!(
                    "cluster {}: boundaries must start at 0 and end at m={}",
                    k + 1,
                    self.m
                )));
            }
            if b.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidData(format!(
                    "cluster {}: boundaries must be strictly increasing",
                    k + 1
                )));
            }
            let regimes = b.len() - 1;
            if cluster.means.len() != regimes || cluster.noise_sd.len() != regimes {
                return Err(Error::InvalidData(format!(
                    "cluster {}: {} regimes need as many means and noise levels",
                    k + 1,
                    regimes
                )));
            }
            if cluster.noise_sd.iter().any(|&s| s < F::zero()) {
                return Err(Error::InvalidData(format!(
                    "cluster {}: negative sigma",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    /// Noiseless mean curve of cluster `k` on the 1-based index grid.
    pub fn mean_curve(&self, k: usize) -> Vec<F> {
        let cluster = &self.clusters[k];
        let mut out = Vec::with_capacity(self.m);
        for r in 0..cluster.means.len() {
            for j in (cluster.boundaries[r] + 1)..=cluster.boundaries[r + 1] {
                out.push(cluster.means[r].eval(j));
            }
        }
        out
    }
}

/// Draws a curve set from `spec`. Deterministic for a fixed spec and seed.
pub fn generate<F: Scalar>(spec: &SimulationSpec<F>) -> Result<CurveSet<F>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cumulative: Vec<f64> = spec
        .mixing
        .iter()
        .scan(0.0, |acc, &a| {
            *acc += a.as_f64();
            Some(*acc)
        })
        .collect();

    let mut values = Array2::zeros((spec.n, spec.m));
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let u: f64 = rng.random();
        let k = cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(spec.clusters.len() - 1);
        labels.push((k + 1) as u32);
        let cluster = &spec.clusters[k];
        let mut col = 0usize;
        for r in 0..cluster.means.len() {
            let sd = cluster.noise_sd[r];
            for j in (cluster.boundaries[r] + 1)..=cluster.boundaries[r + 1] {
                let e: f64 = rng.sample(StandardNormal);
                values[[i, col]] = cluster.means[r].eval(j) + sd * F::cast(e);
                col += 1;
            }
        }
    }
    CurveSet::with_default_grid(values, Some(labels))
}

/// Canonical two-cluster benchmark: 100 curves of 160 points, five regimes
/// per cluster mixing constant and linear means, uniform mixing. `noise_shift`
/// is added to every regime standard deviation.
pub fn table1_spec<F: Scalar>(noise_shift: f64) -> Result<SimulationSpec<F>> {
    benchmark_spec(noise_shift, false)
}

/// Variant with non-uniform mixing (0.2 / 0.8) and a softer variance change
/// in cluster 1 (sigma_13 = 0.7, sigma_14 = 0.6).
pub fn table1_spec_unbalanced<F: Scalar>(noise_shift: f64) -> Result<SimulationSpec<F>> {
    benchmark_spec(noise_shift, true)
}

fn benchmark_spec<F: Scalar>(noise_shift: f64, unbalanced: bool) -> Result<SimulationSpec<F>> {
    let sd = |base: f64| -> Result<F> {
        let v = base + noise_shift;
        if v < 0.0 {
            return Err(Error::InvalidData(format!(
                "negative sigma: {base} + shift {noise_shift}"
            )));
        }
        Ok(F::cast(v))
    };
    let c = |v: f64| RegimeMean::Constant(F::cast(v));
    let lin = |a: f64, b: f64| RegimeMean::Linear {
        slope: F::cast(a),
        intercept: F::cast(b),
    };

    let (mixing, sd13, sd14) = if unbalanced {
        (vec![F::cast(0.2), F::cast(0.8)], 0.7, 0.6)
    } else {
        (vec![F::cast(0.5), F::cast(0.5)], 0.6, 0.8)
    };

    let cluster1 = ClusterSpec {
        boundaries: vec![0, 20, 60, 115, 140, 160],
        means: vec![c(5.0), lin(0.125, 2.5), c(10.0), c(10.0), c(6.0)],
        noise_sd: vec![sd(0.8)?, sd(0.8)?, sd(sd13)?, sd(sd14)?, sd(0.8)?],
    };
    let cluster2 = ClusterSpec {
        boundaries: vec![0, 20, 70, 90, 140, 160],
        means: vec![c(5.0), lin(0.1, 3.0), c(10.0), c(10.0), c(5.5)],
        noise_sd: vec![sd(0.8)?, sd(0.8)?, sd(0.8)?, sd(0.6)?, sd(0.8)?],
    };

    Ok(SimulationSpec {
        n: 100,
        m: 160,
        mixing,
        clusters: vec![cluster1, cluster2],
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec_with_seed(seed: u64) -> SimulationSpec<f64> {
        let mut spec = table1_spec::<f64>(0.0).unwrap();
        spec.seed = seed;
        spec
    }

    #[test]
    fn load_csv_defaults_grid_to_index() {
        let text = "1,2,3,4\n5,6,7,8\n9,10,11,12\n";
        let curves: CurveSet<f64> = parse_csv(text, CsvLayout::bare()).unwrap();
        assert_eq!(curves.n(), 3);
        assert_eq!(curves.m(), 4);
        assert_eq!(curves.grid(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(curves.labels().is_none());
    }

    #[test]
    fn load_csv_passes_grid_header_through() {
        let text = "#grid,0.0,0.5,1.0\n1,2,3\n";
        let curves: CurveSet<f64> = parse_csv(
            text,
            CsvLayout {
                grid_header: true,
                label_column: false,
            },
        )
        .unwrap();
        assert_eq!(curves.grid(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn ragged_rows_report_the_offending_row() {
        let text = "1,2,3\n1,2,3,4\n";
        let err = parse_csv::<f64>(text, CsvLayout::bare()).unwrap_err();
        match err {
            Error::Parse { row, .. } => assert_eq!(row, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_reports_row_and_col() {
        let text = "1,2,3\n1,oops,3\n";
        let err = parse_csv::<f64>(text, CsvLayout::bare()).unwrap_err();
        match err {
            Error::Parse { row, col, .. } => {
                assert_eq!(row, 2);
                assert_eq!(col, 2);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn single_column_is_rejected() {
        let text = "1\n2\n";
        assert!(matches!(
            parse_csv::<f64>(text, CsvLayout::bare()),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let spec = spec_with_seed(3);
        let curves = generate(&spec).unwrap();
        let text = format_csv(&curves, CsvLayout::labeled());
        let back: CurveSet<f64> = parse_csv(&text, CsvLayout::labeled()).unwrap();
        assert_eq!(curves, back);
    }

    #[test]
    fn generation_is_reproducible() {
        let a = generate(&spec_with_seed(42)).unwrap();
        let b = generate(&spec_with_seed(42)).unwrap();
        assert_eq!(a, b);
        let c = generate(&spec_with_seed(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_reproduces_cluster_means() {
        let mut spec = spec_with_seed(7);
        for cluster in &mut spec.clusters {
            for sd in &mut cluster.noise_sd {
                *sd = 0.0;
            }
        }
        let curves = generate(&spec).unwrap();
        let labels = curves.labels().unwrap().to_vec();
        for i in 0..curves.n() {
            let mean = spec.mean_curve((labels[i] - 1) as usize);
            for (j, &v) in curves.curve(i).iter().enumerate() {
                assert_eq!(v, mean[j]);
            }
        }
    }

    #[test]
    fn degenerate_mixing_labels_everything_cluster_one() {
        let mut spec = spec_with_seed(11);
        spec.mixing = vec![1.0, 0.0];
        let curves = generate(&spec).unwrap();
        assert!(curves.labels().unwrap().iter().all(|&l| l == 1));
    }

    #[test]
    fn table1_noise_levels() {
        let spec = table1_spec::<f64>(0.0).unwrap();
        assert_eq!(spec.n, 100);
        assert_eq!(spec.m, 160);
        assert_abs_diff_eq!(spec.clusters[0].noise_sd[0], 0.8);
        assert_abs_diff_eq!(spec.clusters[0].noise_sd[2], 0.6);
        assert_abs_diff_eq!(spec.clusters[1].noise_sd[3], 0.6);

        let shifted = table1_spec::<f64>(0.2).unwrap();
        assert_abs_diff_eq!(shifted.clusters[0].noise_sd[0], 1.0);

        assert!(matches!(
            table1_spec::<f64>(-1.0),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn unbalanced_variant_adjusts_mixing_and_sigmas() {
        let spec = table1_spec_unbalanced::<f64>(0.0).unwrap();
        assert_abs_diff_eq!(spec.mixing[0], 0.2);
        assert_abs_diff_eq!(spec.mixing[1], 0.8);
        assert_abs_diff_eq!(spec.clusters[0].noise_sd[2], 0.7);
        assert_abs_diff_eq!(spec.clusters[0].noise_sd[3], 0.6);
    }

    #[test]
    fn empirical_moments_match_the_spec() {
        let spec = spec_with_seed(123);
        let curves = generate(&spec).unwrap();
        let labels = curves.labels().unwrap().to_vec();

        // Cluster frequencies: binomial three-sigma band around alpha.
        let n = curves.n() as f64;
        for (k, &alpha) in spec.mixing.iter().enumerate() {
            let count = labels.iter().filter(|&&l| l == (k + 1) as u32).count() as f64;
            let sigma = (n * alpha * (1.0 - alpha)).sqrt();
            assert!(
                (count - n * alpha).abs() <= 3.0 * sigma,
                "cluster {k}: count {count} too far from {}",
                n * alpha
            );
        }

        // Per-regime residual standard deviation within 3 sigma / sqrt(count).
        for (k, cluster) in spec.clusters.iter().enumerate() {
            let members: Vec<usize> = (0..curves.n())
                .filter(|&i| labels[i] == (k + 1) as u32)
                .collect();
            for r in 0..cluster.means.len() {
                let mut sq = 0.0;
                let mut count = 0.0;
                for &i in &members {
                    for j in (cluster.boundaries[r] + 1)..=cluster.boundaries[r + 1] {
                        let resid = curves.values()[[i, j - 1]] - cluster.means[r].eval(j);
                        sq += resid * resid;
                        count += 1.0;
                    }
                }
                let sd = (sq / count).sqrt();
                let expected = cluster.noise_sd[r];
                assert!(
                    (sd - expected).abs() <= 3.0 * expected / count.sqrt(),
                    "cluster {k} regime {r}: sd {sd} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn generated_shape_matches_benchmark_layout() {
        let curves = generate(&spec_with_seed(7)).unwrap();
        assert_eq!(curves.n(), 100);
        assert_eq!(curves.m(), 160);
        // Regime means show up where the spec places them.
        let spec = spec_with_seed(7);
        let labels = curves.labels().unwrap().to_vec();
        let first_cluster1 = (0..curves.n()).find(|&i| labels[i] == 1).unwrap();
        let mean = spec.mean_curve(0);
        // Sample mean over regime 3 (constant 10) of cluster 1 members.
        let members: Vec<usize> = (0..curves.n()).filter(|&i| labels[i] == 1).collect();
        let mut acc = 0.0;
        let mut count = 0.0;
        for &i in &members {
            for j in 61..=115 {
                acc += curves.values()[[i, j - 1]];
                count += 1.0;
            }
        }
        assert!((acc / count - 10.0).abs() < 0.1);
        assert_abs_diff_eq!(mean[60], 10.0);
        assert!(first_cluster1 < curves.n());
    }
}
