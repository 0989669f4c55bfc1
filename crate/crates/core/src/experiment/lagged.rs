//! Block order-constrained time-lagged regression on daily ozone data.
//!
//! Row `i` of the design holds, for every predictor, its values on the current
//! day and the `K − 1` previous days, most recent first. Magnitudes within a
//! predictor's block are required to be nonincreasing in the lag.

use std::io::Read;

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gaussian_vec, seeded_sorted_start};
use crate::constraint::ConstraintSet;
use crate::error::{check_dim, domain, Error, Result};
use crate::problem::{LeastSquares, Problem};
use crate::regularizer::Regularizer;
use crate::solver::dma::dma_solve;
use crate::solver::npg::{npg_solve, ProxSpec};
use crate::solver::{RunResult, SolverConfig};

/// Columns of the raw table, response first. `doy` is read but unused.
pub const COLUMNS: [&str; 10] = [
    "ozone", "vh", "wind", "humidity", "temp", "ibh", "dpg", "ibt", "vis", "doy",
];

/// Response plus the eight predictors.
pub const USED_COLUMNS: usize = 9;

pub const DEFAULT_MAX_LAG: usize = 20;
pub const DEFAULT_OBSERVATIONS: usize = 155;

/// Parses a comma-separated table with a header naming at least the response
/// and the eight predictors. Returns the rows with columns in [`COLUMNS`]
/// order, `doy` dropped.
pub fn parse_table<R: Read>(reader: R) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index: Vec<usize> = COLUMNS[..USED_COLUMNS]
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim_matches('"').eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::Parse(format!("missing column {name:?} in table header")))
        })
        .collect::<Result<_>>()?;
    let mut data = Vec::new();
    let mut rows = 0;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for &j in &index {
            let field = rec
                .get(j)
                .ok_or_else(|| Error::Parse(format!("row {} is too short", line + 2)))?;
            let value: f64 = field
                .trim_matches('"')
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad number {field:?}", line + 2)))?;
            data.push(value);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Parse("table has no data rows".into()));
    }
    Ok(Array2::from_shape_vec((rows, USED_COLUMNS), data).expect("row-major fill"))
}

/// Small deterministic table with the same schema, for offline runs.
///
/// Predictors are smooth random walks and the response depends on the
/// current and two previous days of a few predictors plus noise.
pub fn synthetic_table(rows: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let preds = USED_COLUMNS - 1;
    let mut z = Array2::zeros((rows, USED_COLUMNS));
    let base = [5600.0, 5.0, 50.0, 60.0, 2000.0, 20.0, 250.0, 150.0];
    let spread = [60.0, 2.0, 15.0, 10.0, 1000.0, 30.0, 60.0, 80.0];
    let mut state = gaussian_vec(&mut rng, preds);
    for r in 0..rows {
        let shock = gaussian_vec(&mut rng, preds);
        state = &state * 0.8 + &(shock * 0.6);
        for j in 0..preds {
            z[[r, j + 1]] = base[j] + spread[j] * state[j];
        }
    }
    let noise = gaussian_vec(&mut rng, rows);
    for r in 0..rows {
        let lagged = |j: usize, lag: usize| {
            let rr = r.saturating_sub(lag);
            (z[[rr, j + 1]] - base[j]) / spread[j]
        };
        let signal = 3.0 * lagged(3, 0) + 1.5 * lagged(3, 1) + 0.5 * lagged(3, 2)
            - 2.0 * lagged(4, 0)
            + 1.0 * lagged(0, 0);
        z[[r, 0]] = (11.0 + 2.0 * signal + 1.5 * noise[r]).max(1.0);
    }
    z
}

/// Lagged design and response with the row counter shifted by `offset`.
///
/// With 1-based rows, `b_i = Z[offset + i + K − 1, ozone]` and
/// `A[i, (j − 1)K + k] = Z[offset + i + K − k, predictor j]`.
pub fn build_lagged_dataset(
    z: &Array2<f64>,
    max_lag: usize,
    observations: usize,
    offset: usize,
) -> Result<(Array2<f64>, Array1<f64>)> {
    if max_lag == 0 || observations == 0 {
        return domain("lag and number of observations must be positive");
    }
    if z.ncols() != USED_COLUMNS {
        return Err(Error::DimensionMismatch {
            expected: USED_COLUMNS,
            found: z.ncols(),
        });
    }
    let needed = offset + observations + max_lag - 1;
    if z.nrows() < needed {
        return domain(format!(
            "table has {} rows but the lagged design needs {needed}",
            z.nrows()
        ));
    }
    let preds = USED_COLUMNS - 1;
    let mut a = Array2::zeros((observations, preds * max_lag));
    let mut b = Array1::zeros(observations);
    for i in 0..observations {
        let current = offset + i + max_lag - 1;
        b[i] = z[[current, 0]];
        for j in 0..preds {
            for k in 0..max_lag {
                a[[i, j * max_lag + k]] = z[[current - k, j + 1]];
            }
        }
    }
    Ok((a, b))
}

/// Sample mean and standard deviation (`n − 1` denominator).
pub fn mean_std(v: &[f64]) -> Result<(f64, f64)> {
    if v.len() < 2 {
        return domain("standardization needs at least two samples");
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    if !(std > 0.0) {
        return domain("cannot standardize a constant column");
    }
    Ok((mean, std))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub col_mean: Vec<f64>,
    pub col_std: Vec<f64>,
    pub b_mean: f64,
    pub b_std: f64,
}

impl Standardization {
    pub fn unstandardize_b(&self, b_std: &Array1<f64>) -> Array1<f64> {
        b_std.mapv(|t| t * self.b_std + self.b_mean)
    }
}

/// Standardizes every column of `a` by its own statistics.
pub fn standardize_columns(a: &Array2<f64>) -> Result<(Array2<f64>, Vec<f64>, Vec<f64>)> {
    let mut out = a.clone();
    let mut means = Vec::with_capacity(a.ncols());
    let mut stds = Vec::with_capacity(a.ncols());
    for mut col in out.axis_iter_mut(Axis(1)) {
        let (m, s) = mean_std(&col.to_vec())?;
        col.mapv_inplace(|t| (t - m) / s);
        means.push(m);
        stds.push(s);
    }
    Ok((out, means, stds))
}

pub fn standardize_fit(
    a: &Array2<f64>,
    b: &Array1<f64>,
) -> Result<(Array2<f64>, Array1<f64>, Standardization)> {
    check_dim(a.nrows(), b.len())?;
    let (a_std, col_mean, col_std) = standardize_columns(a)?;
    let (b_mean, b_std) = mean_std(&b.to_vec())?;
    let bs = b.mapv(|t| (t - b_mean) / b_std);
    Ok((
        a_std,
        bs,
        Standardization {
            col_mean,
            col_std,
            b_mean,
            b_std,
        },
    ))
}

/// `std(b)·(Ã'x) + mean(b)`, where `Ã'` is `a_val` standardized by its own
/// column statistics.
pub fn predict_validation(
    x: &Array1<f64>,
    a_val: &Array2<f64>,
    b_mean: f64,
    b_std: f64,
) -> Result<Array1<f64>> {
    check_dim(a_val.ncols(), x.len())?;
    let (a_prime, _, _) = standardize_columns(a_val)?;
    Ok(a_prime.dot(x).mapv(|t| b_std * t + b_mean))
}

/// `n` points spaced evenly in `log10` between `10^lo` and `10^hi`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![10f64.powf(hi)],
        _ => (0..n)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect(),
    }
}

/// Training and validation data for one lag/observation setting.
#[derive(Debug, Clone)]
pub struct LaggedDataset {
    pub max_lag: usize,
    pub num_predictors: usize,
    pub observations: usize,
    /// Standardized training design and response.
    pub a: Array2<f64>,
    pub b: Array1<f64>,
    pub stats: Standardization,
    /// Raw validation design and response.
    pub a_val: Array2<f64>,
    pub b_val: Array1<f64>,
}

impl LaggedDataset {
    /// Training rows start at the top of the table, validation rows `N` later.
    pub fn from_table(z: &Array2<f64>, max_lag: usize, observations: usize) -> Result<Self> {
        let (a_raw, b_raw) = build_lagged_dataset(z, max_lag, observations, 0)?;
        let (a_val, b_val) = build_lagged_dataset(z, max_lag, observations, observations)?;
        let (a, b, stats) = standardize_fit(&a_raw, &b_raw)?;
        Ok(Self {
            max_lag,
            num_predictors: USED_COLUMNS - 1,
            observations,
            a,
            b,
            stats,
            a_val,
            b_val,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// `(1/2N)‖Ax − b‖²` on the standardized training data.
    pub fn least_squares(&self) -> LeastSquares {
        LeastSquares::new(
            self.a.clone(),
            self.b.clone(),
            1.0 / self.observations as f64,
        )
        .expect("dimensions fixed at construction")
    }

    pub fn constraint(&self) -> ConstraintSet {
        ConstraintSet::block_isotone(self.dim(), self.max_lag)
            .expect("dimension is a multiple of the lag")
    }

    /// Gaussian start, sorted by magnitude within every lag block.
    pub fn initial_point(&self, seed: u64) -> Array1<f64> {
        seeded_sorted_start(seed, self.dim(), self.max_lag)
    }

    /// `‖Ax − b‖` on the standardized training data.
    pub fn identification_error(&self, x: &Array1<f64>) -> f64 {
        let r = self.a.dot(x) - &self.b;
        r.dot(&r).sqrt()
    }

    pub fn predict(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        predict_validation(x, &self.a_val, self.stats.b_mean, self.stats.b_std)
    }

    /// `‖b̃_pred − b̃‖` in original units.
    pub fn validation_error(&self, x: &Array1<f64>) -> Result<f64> {
        let d = self.predict(x)? - &self.b_val;
        Ok(d.dot(&d).sqrt())
    }
}

/// The block-constrained `ℓ_q` model. `q = 1` is solved by NPG, `q ≤ 0.5` by DMA.
pub fn solve_lagged(
    ds: &LaggedDataset,
    exponent_q: f64,
    lambda: f64,
    config: &SolverConfig,
    x0: Array1<f64>,
) -> Result<RunResult> {
    let smooth = ds.least_squares();
    let cs = ds.constraint();
    if exponent_q == 1.0 {
        let spec = ProxSpec::L1Isotone {
            lambda,
            constraint: cs,
        };
        npg_solve(&smooth, &spec, config, x0)
    } else {
        let pb = Problem::new(smooth, Regularizer::lp(exponent_q)?, lambda, cs)?;
        dma_solve(&pb, config, x0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub identification_error: f64,
    pub validation_error: f64,
    pub iterations: usize,
    pub nonzeros: usize,
}

/// Solves for every `λ` from the same start. Rows keep the order of `lambdas`.
pub fn lambda_sweep(
    ds: &LaggedDataset,
    exponent_q: f64,
    lambdas: &[f64],
    config: &SolverConfig,
    x0: &Array1<f64>,
) -> Result<Vec<SweepRow>> {
    lambdas
        .par_iter()
        .map(|&lambda| {
            let res = solve_lagged(ds, exponent_q, lambda, config, x0.clone())?;
            Ok(SweepRow {
                lambda,
                identification_error: ds.identification_error(&res.x),
                validation_error: ds.validation_error(&res.x)?,
                iterations: res.iterations(),
                nonzeros: res.x.iter().filter(|v| **v != 0.0).count(),
            })
        })
        .collect()
}

/// Row with the least validation error.
pub fn best_row(rows: &[SweepRow]) -> Option<&SweepRow> {
    rows.iter()
        .min_by(|a, b| a.validation_error.total_cmp(&b.validation_error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn indexed_table(rows: usize) -> Array2<f64> {
        // Z[r][c] = 1000 r + c with 1-based r and c
        Array2::from_shape_fn((rows, USED_COLUMNS), |(r, c)| {
            1000.0 * (r + 1) as f64 + (c + 1) as f64
        })
    }

    #[test]
    fn corner_entries() {
        let z = indexed_table(60);
        let (k, n) = (5, 20);
        let (a, b) = build_lagged_dataset(&z, k, n, 0).unwrap();
        assert_eq!(a.dim(), (n, 8 * k));
        // b_1 = row K, ozone column 1
        assert_eq!(b[0], 1000.0 * k as f64 + 1.0);
        // A_{1,1} = vh (column 2) at row K; A_{1,K} = vh at row 1
        assert_eq!(a[[0, 0]], 1000.0 * k as f64 + 2.0);
        assert_eq!(a[[0, k - 1]], 1000.0 + 2.0);
        // A_{N,8K} = vis (column 9) at row N
        assert_eq!(a[[n - 1, 8 * k - 1]], 1000.0 * n as f64 + 9.0);
        // A_{N,7K+1} = vis at row N + K − 1
        assert_eq!(a[[n - 1, 7 * k]], 1000.0 * (n + k - 1) as f64 + 9.0);

        let (_, bv) = build_lagged_dataset(&z, k, n, n).unwrap();
        assert_eq!(bv[0], 1000.0 * (n + k) as f64 + 1.0);
        assert_eq!(bv[n - 1], 1000.0 * (2 * n + k - 1) as f64 + 1.0);
    }

    #[test]
    fn full_size_row_ranges() {
        let z = indexed_table(330);
        let (_, b) = build_lagged_dataset(&z, 20, 155, 0).unwrap();
        assert_eq!(b[0], 20_001.0);
        assert_eq!(b[154], 174_001.0);
        let (_, bv) = build_lagged_dataset(&z, 20, 155, 155).unwrap();
        assert_eq!(bv[0], 175_001.0);
        assert_eq!(bv[154], 329_001.0);
        assert!(build_lagged_dataset(&z, 20, 156, 156).is_err());
    }

    #[test]
    fn no_lag_is_plain_regression() {
        let z = indexed_table(10);
        let (a, b) = build_lagged_dataset(&z, 1, 10, 0).unwrap();
        for i in 0..10 {
            assert_eq!(b[i], z[[i, 0]]);
            for j in 0..8 {
                assert_eq!(a[[i, j]], z[[i, j + 1]]);
            }
        }
    }

    #[test]
    fn standardization() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m, s), (2.0, 1.0));
        assert!(mean_std(&[4.0, 4.0, 4.0]).is_err());
        let a = array![[1.0, 10.0], [2.0, 30.0], [3.0, 20.0]];
        let b = array![5.0, 7.0, 12.0];
        let (as_, bs, st) = standardize_fit(&a, &b).unwrap();
        assert_eq!(as_.column(0).to_vec(), vec![-1.0, 0.0, 1.0]);
        for col in as_.axis_iter(Axis(1)) {
            let (m, s) = mean_std(&col.to_vec()).unwrap();
            assert!(m.abs() <= 1e-12);
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
        let back = st.unstandardize_b(&bs);
        for (x, y) in back.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        assert!(standardize_fit(&array![[1.0], [1.0]], &array![1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_coefficients_predict_the_mean() {
        let a_val = array![[1.0, 4.0], [2.0, 5.0], [3.0, 9.0]];
        let pred = predict_validation(&Array1::zeros(2), &a_val, 7.5, 2.0).unwrap();
        assert_eq!(pred, array![7.5, 7.5, 7.5]);
    }

    #[test]
    fn logspace_grid() {
        let g = logspace(-4.0, 1.0, 100);
        assert_eq!(g.len(), 100);
        assert_abs_diff_eq!(g[0], 1e-4, epsilon = 1e-18);
        assert_abs_diff_eq!(g[99], 10.0, epsilon = 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn parse_round_trip() {
        let text = "\"ozone\",\"vh\",\"wind\",\"humidity\",\"temp\",\"ibh\",\"dpg\",\"ibt\",\"vis\",\"doy\"\n\
                    3,5710,4,28,40,2693,-25,87,250,3\n\
                    5,5700,3,37,45,590,-24,128,100,4\n";
        let z = parse_table(text.as_bytes()).unwrap();
        assert_eq!(z.dim(), (2, USED_COLUMNS));
        assert_eq!(
            z.row(1).to_vec(),
            vec![5.0, 5700.0, 3.0, 37.0, 45.0, 590.0, -24.0, 128.0, 100.0]
        );
        assert!(parse_table("ozone,vh\n1,2\n".as_bytes()).is_err());
        let reordered = "doy,vis,ibt,dpg,ibh,temp,humidity,wind,vh,ozone\n1,2,3,4,5,6,7,8,9,10\n";
        let z = parse_table(reordered.as_bytes()).unwrap();
        assert_eq!(
            z.row(0).to_vec(),
            vec![10.0, 9.0, 8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0]
        );
    }

    #[test]
    fn synthetic_sweep_runs() {
        let z = synthetic_table(30, 7);
        let ds = LaggedDataset::from_table(&z, 5, 12).unwrap();
        let x0 = ds.initial_point(0);
        let cfg = SolverConfig::default().with_max_iters(2000);
        for q in [0.3, 0.5, 1.0] {
            let rows = lambda_sweep(&ds, q, &logspace(-2.0, 0.0, 4), &cfg, &x0).unwrap();
            assert_eq!(rows.len(), 4);
            assert!(rows.iter().all(|r| r.validation_error.is_finite()));
        }
    }
}
