//! The two-way recurrence protocol that drives copies of the 2D⊗2D state towards a private bit.
//!
//! Each step takes the state accumulated so far and one fresh copy. Alice and
//! Bob each apply a C-NOT with the fresh key qubit as source and the
//! accumulated key qubit as target, measure the targets, and keep the fresh
//! key only if their outcomes agree. Both shields are kept. With `k` copies
//! consumed (`k - 1` steps) the result is `ρ^(D,k)`, whose key coherence block
//! is `X_D^{⊗k} / N_{D,k}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{self, Operator};
use crate::private::{self, PrivateState, ProductBasis};
use crate::states::{self, KeyShieldState};

/// Largest dense matrix side the dense routines will build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemCap(pub usize);

impl MemCap {
    pub const DEFAULT: MemCap = MemCap(4096);
    pub const ENV_VAR: &'static str = "BOUNDKEY_MEM_CAP";

    /// Reads `BOUNDKEY_MEM_CAP`, falling back to 4096.
    pub fn from_env() -> Result<MemCap> {
        match std::env::var(Self::ENV_VAR) {
            Ok(text) => text.trim().parse::<usize>().ok().filter(|&cap| cap > 0).map(MemCap).ok_or_else(|| {
                Error::InvalidParameter(format!("{} = {text:?} is not a positive integer", Self::ENV_VAR))
            }),
            Err(_) => Ok(MemCap::DEFAULT),
        }
    }

    pub fn check(self, dim: usize) -> Result<()> {
        if dim > self.0 {
            return Err(Error::MemoryCap { dim, cap: self.0 });
        }
        Ok(())
    }

    pub fn allows(self, dim: usize) -> bool {
        dim <= self.0
    }
}

impl Default for MemCap {
    fn default() -> Self {
        MemCap::DEFAULT
    }
}

/// Side of the dense matrix of `ρ^(D,k)`: `4 D^{2k}`, or `None` on overflow.
pub fn dense_dim(dim: usize, k: usize) -> Option<usize> {
    let shield = dim.checked_pow(u32::try_from(k).ok()?)?;
    shield.checked_mul(shield)?.checked_mul(4)
}

fn require_params(dim: usize, k: usize) -> Result<()> {
    if dim < 3 {
        return Err(Error::InvalidParameter(format!("D must be at least 3, got {dim}")));
    }
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    Ok(())
}

/// `D² / (D² + 2D - 4)`, the weight ratio of the middle blocks to the corner blocks.
pub fn middle_weight_ratio(dim: usize) -> f64 {
    let d = dim as f64;
    d * d / (d * d + 2.0 * d - 4.0)
}

/// `N_{D,k} = 2[1 + (D²/(D²+2D-4))^k]`.
pub fn normalization(dim: usize, k: usize) -> f64 {
    2.0 * (1.0 + middle_weight_ratio(dim).powi(k as i32))
}

/// Closed-form `||A_{00,11}(D,k)||_Tr = ||X_D||_Tr^k / N_{D,k} = 1 / N_{D,k}`.
pub fn key_block_norm_closed_form(dim: usize, k: usize) -> f64 {
    1.0 / normalization(dim, k)
}

/// Regroups `k` copies on `(A'_1 B'_1)...(A'_k B'_k)` into `(A'_1..A'_k | B'_1..B'_k)`,
/// merged into two subsystems.
fn regroup_copies(op: &Operator, dim: usize, k: usize) -> Result<Operator> {
    let order: Vec<usize> = (0..k).map(|c| 2 * c).chain((0..k).map(|c| 2 * c + 1)).collect();
    let side = dim.pow(k as u32);
    op.permute_subsystems(&order)?.with_dims(vec![side, side])
}

fn shield_power(op: &Operator, dim: usize, k: usize) -> Result<Operator> {
    regroup_copies(&matrix::tensor_power(op, k), dim, k)
}

/// `ρ^(D,k)` assembled directly from tensor powers of the shield blocks.
pub fn rho_k_closed_form(dim: usize, k: usize, cap: MemCap) -> Result<KeyShieldState> {
    require_params(dim, k)?;
    cap.check(dense_dim(dim, k).unwrap_or(usize::MAX))?;
    let x = states::make_x(dim)?;
    let n = normalization(dim, k);
    let corner = shield_power(&x.abs_x, dim, k)?.scale(1.0 / n);
    let coherence = shield_power(&x.x, dim, k)?.scale(1.0 / n);
    let middle = shield_power(&x.abs_x_pt_abs_pt, dim, k)?.scale(1.0 / n);
    let side = dim.pow(k as u32);
    KeyShieldState::from_blocks(2, (side, side), |i, j, k2, l| match ((i, j), (k2, l)) {
        ((0, 0), (0, 0)) | ((1, 1), (1, 1)) => Some(corner.clone()),
        ((0, 0), (1, 1)) | ((1, 1), (0, 0)) => Some(coherence.clone()),
        ((0, 1), (0, 1)) | ((1, 0), (1, 0)) => Some(middle.clone()),
        _ => None,
    })
}

#[derive(Clone, Debug)]
pub struct RecurrenceResult {
    pub state: KeyShieldState,
    /// Probability that the two target measurements agreed in this step.
    pub success_probability: f64,
    /// Number of copies consumed to produce `state`.
    pub copies: usize,
}

/// Basis map of two C-NOTs on a multi-qubit-key index space: `target ^= source` for each pair.
fn cnot_map(dims: &[usize], pairs: &[(usize, usize)]) -> Vec<usize> {
    let st = matrix::strides(dims);
    let n: usize = dims.iter().product();
    (0..n)
        .map(|x| {
            pairs.iter().fold(x, |y, &(source, target)| {
                let s = (x / st[source]) % 2;
                let t = (x / st[target]) % 2;
                y - t * st[target] + (t ^ s) * st[target]
            })
        })
        .collect()
}

/// Smallest success probability accepted from a postselection.
const MIN_SUCCESS: f64 = 1e-14;

/// One exact step of the protocol on density matrices.
pub fn recurrence_step(accumulated: &KeyShieldState, fresh: &KeyShieldState, cap: MemCap) -> Result<RecurrenceResult> {
    if accumulated.key_dim() != 2 || fresh.key_dim() != 2 {
        return Err(Error::DimensionMismatch("recurrence needs qubit keys on both inputs".into()));
    }
    let (fa, fb) = fresh.shield_dims();
    let (aa, ab) = accumulated.shield_dims();
    if fa != fb || aa != ab {
        return Err(Error::DimensionMismatch(format!("shields must be D⊗D and D^m⊗D^m, got {fa}⊗{fb} and {aa}⊗{ab}")));
    }
    let mut copies = 1;
    let mut side = fa;
    while side < aa {
        side *= fa;
        copies += 1;
    }
    if side != aa {
        return Err(Error::DimensionMismatch(format!("accumulated shield {aa} is not a power of {fa}")));
    }
    cap.check(accumulated.rho().dim().saturating_mul(fresh.rho().dim()))?;

    // [A_acc, B_acc, A'_acc, B'_acc, A_new, B_new, A'_new, B'_new]
    let joint = matrix::tensor(accumulated.rho(), fresh.rho());
    let map = cnot_map(joint.dims(), &[(4, 0), (5, 1)]);
    let rotated = joint.permute_basis(&map)?;

    // keep only agreeing target outcomes 00 and 11
    let st = matrix::strides(joint.dims());
    let agree = |x: usize| (x / st[0]) % 2 == (x / st[1]) % 2;
    let kept = Operator::from_fn(rotated.dims().to_vec(), |r, c| {
        if agree(r) && agree(c) {
            rotated.data()[(r, c)]
        } else {
            Default::default()
        }
    });
    let success_probability = kept.trace().re;
    if success_probability < MIN_SUCCESS {
        return Err(Error::DegeneratePostselection(success_probability));
    }

    // [A'_acc, B'_acc, A_new, B_new, A'_new, B'_new] -> [A_new, B_new, A'_acc A'_new, B'_acc B'_new]
    let traced = matrix::partial_trace(&kept, &[0, 1])?;
    let regrouped = traced.permute_subsystems(&[2, 3, 0, 4, 1, 5])?;
    let rho = regrouped.with_dims(vec![2, 2, aa * fa, ab * fb])?.scale(1.0 / success_probability);
    Ok(RecurrenceResult { state: KeyShieldState::new(rho)?, success_probability, copies: copies + 1 })
}

/// Runs the protocol on `k` copies of `ρ^(D)`; entry `i` holds the state after consuming `i + 2` copies.
pub fn run_protocol(dim: usize, k: usize, cap: MemCap) -> Result<Vec<RecurrenceResult>> {
    require_params(dim, k)?;
    let fresh = states::make_rho(dim)?;
    let mut out: Vec<RecurrenceResult> = Vec::with_capacity(k.saturating_sub(1));
    for _ in 1..k {
        let acc = out.last().map_or(&fresh, |r| &r.state);
        let step = recurrence_step(acc, &fresh, cap)?;
        out.push(step);
    }
    Ok(out)
}

/// `||A_{00,11}||_Tr` of a state with a qubit key.
pub fn key_block_trace_norm(state: &KeyShieldState) -> Result<f64> {
    if state.key_dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "key block criterion needs a qubit key, got d = {}",
            state.key_dim()
        )));
    }
    Ok(matrix::trace_norm(&state.block(0, 0, 1, 1)))
}

/// The private bit with corners `|X_D^{⊗k}|/2` and coherences `X_D^{⊗k}/2`.
///
/// Written as `σ = |X^{⊗k}|`, `U_0 = sign(X^{⊗k})`, `U_1 = I`; the sign factor
/// is orthogonal because `X_D` has no zero eigenvalue.
pub fn limiting_pbit(dim: usize, k: usize, cap: MemCap) -> Result<PrivateState> {
    require_params(dim, k)?;
    cap.check(dense_dim(dim, k).unwrap_or(usize::MAX))?;
    let x = states::make_x(dim)?;
    let xk = shield_power(&x.x, dim, k)?;
    let spectrum = matrix::hermitian_eig(&xk)?;
    let smallest = spectrum.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if smallest < 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "X^(⊗{k}) is rank deficient (smallest |eigenvalue| {smallest:e}); no polar unitary"
        )));
    }
    let dims = xk.dims().to_vec();
    let sign = Operator::new(dims.clone(), spectrum.reconstruct_with(f64::signum))?;
    let sigma = Operator::new(dims.clone(), spectrum.reconstruct_with(f64::abs))?;
    private::make_pdit(ProductBasis::standard(2), sigma, vec![sign, Operator::identity(dims)])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionEntry {
    pub k: usize,
    /// Closed-form `1 / N_{D,k}`.
    pub key_block_trace_norm: f64,
    pub gap_to_half: f64,
    /// Trace distance (with the 1/2 factor) to [`limiting_pbit`]; dense instances only.
    pub pbit_trace_distance: Option<f64>,
    /// Key-block trace norm measured on the dense `ρ^(D,k)`; dense instances only.
    pub dense_key_block_trace_norm: Option<f64>,
}

impl CriterionEntry {
    pub fn dense_checked(&self) -> bool {
        self.dense_key_block_trace_norm.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionSeries {
    pub dim: usize,
    pub entries: Vec<CriterionEntry>,
}

/// Key-block criterion for `k = 1..=k_max`; dense cross-checks wherever `4 D^{2k}` fits in `cap`.
pub fn criterion_series(dim: usize, k_max: usize, cap: MemCap) -> Result<CriterionSeries> {
    require_params(dim, k_max)?;
    let mut entries = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let norm = key_block_norm_closed_form(dim, k);
        let mut entry = CriterionEntry {
            k,
            key_block_trace_norm: norm,
            gap_to_half: 0.5 - norm,
            pbit_trace_distance: None,
            dense_key_block_trace_norm: None,
        };
        if dense_dim(dim, k).is_some_and(|n| cap.allows(n)) {
            let rho = rho_k_closed_form(dim, k, cap)?;
            entry.dense_key_block_trace_norm = Some(key_block_trace_norm(&rho)?);
            let pbit = limiting_pbit(dim, k, cap)?.assemble();
            entry.pbit_trace_distance = Some(matrix::trace_distance(rho.rho(), pbit.rho())?);
        }
        entries.push(entry);
    }
    Ok(CriterionSeries { dim, entries })
}

pub const CSV_HEADER: [&str; 6] =
    ["D", "k", "key_block_trace_norm", "gap_to_half", "pbit_trace_distance", "dense_checked"];

impl CriterionSeries {
    /// CSV with header `D,k,key_block_trace_norm,gap_to_half,pbit_trace_distance,dense_checked`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for e in &self.entries {
            w.write_record([
                self.dim.to_string(),
                e.k.to_string(),
                crate::report::sig12(e.key_block_trace_norm),
                crate::report::sig12(e.gap_to_half),
                e.pbit_trace_distance.map(crate::report::sig12).unwrap_or_default(),
                e.dense_checked().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}
