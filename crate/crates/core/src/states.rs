//! The shield-part operator families and the 2D⊗2D bound entangled states built from them.
//!
//! All matrices live on `C^D ⊗ C^D` (subsystems `[A', B']`) unless stated
//! otherwise; the full states use the ordering `[A, B, A', B']` with the key
//! qubits outermost.

use nalgebra::DVector;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::matrix::{self, Operator, C64};

/// Integer ratio turned into a float only at the point of use.
pub type Rational = Ratio<i64>;

pub fn ratio_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Named projectors on `C^D ⊗ C^D`.
#[derive(Clone, Debug)]
pub struct ProjectorFamily {
    pub dim: usize,
    /// `|Ψ+><Ψ+|` with `|Ψ+> = D^{-1/2} Σ |ii>`.
    pub p_plus: Operator,
    /// `Σ|ii><ii| - P+`.
    pub p: Operator,
    /// `I - Σ|ii><ii|`.
    pub q: Operator,
    /// `(I + V - 2Σ|ii><ii|) / 2`, the symmetric subspace with the diagonal kets removed.
    pub s: Operator,
    /// Swap, `V|a>|b> = |b>|a>`.
    pub v: Operator,
    pub identity: Operator,
}

pub fn maximally_entangled_ket(dim: usize) -> DVector<C64> {
    let amp = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
    DVector::from_fn(dim * dim, |idx, _| if idx / dim == idx % dim { amp } else { C64::new(0.0, 0.0) })
}

/// `P+^(D)` on `C^D ⊗ C^D`.
pub fn max_entangled_projector(dim: usize) -> Operator {
    Operator::projector(vec![dim, dim], &maximally_entangled_ket(dim)).expect("ket length matches dims")
}

pub fn swap_operator(dim: usize) -> Operator {
    Operator::from_fn(vec![dim, dim], |r, c| {
        let (a, b) = (c / dim, c % dim);
        if r == b * dim + a {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `Σ_i |ii><ii|`.
fn diagonal_kets(dim: usize) -> Operator {
    Operator::from_fn(vec![dim, dim], |r, c| {
        if r == c && r / dim == r % dim {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn make_projector_family(dim: usize) -> Result<ProjectorFamily> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!("projector family needs D >= 2, got {dim}")));
    }
    let dims = vec![dim, dim];
    let identity = Operator::identity(dims);
    let diag = diagonal_kets(dim);
    let p_plus = max_entangled_projector(dim);
    let v = swap_operator(dim);
    let p = diag.sub(&p_plus)?;
    let q = identity.sub(&diag)?;
    let s = identity.add(&v)?.sub(&diag.scale(2.0))?.scale(0.5);
    Ok(ProjectorFamily { dim, p_plus, p, q, s, v, identity })
}

/// Combination `a·P+ + b·P + c·Q + s·S + i·I` with rational weights.
fn combine(f: &ProjectorFamily, terms: &[(Rational, &Operator)]) -> Operator {
    terms.iter().fold(Operator::zeros(f.identity.dims().to_vec()), |acc, (w, op)| {
        acc.add(&op.scale(ratio_to_f64(*w))).expect("family members share dims")
    })
}

/// `X_D` together with the absolute values and partial transposes used to build the state.
#[derive(Clone, Debug)]
pub struct XFamily {
    pub dim: usize,
    pub x: Operator,
    /// `|X|`
    pub abs_x: Operator,
    /// `|X|^{T_B'}`
    pub abs_x_pt: Operator,
    /// `X^{T_B'}`
    pub x_pt: Operator,
    /// `|X^{T_B'}|`
    pub abs_x_pt_abs: Operator,
    /// `|X^{T_B'}|^{T_B'}`
    pub abs_x_pt_abs_pt: Operator,
    /// `1 / (D² + 2D - 4)`
    pub normalizer: Rational,
}

fn x_normalizer(dim: usize) -> Rational {
    let d = dim as i64;
    Rational::new(1, d * d + 2 * d - 4)
}

fn require_x_dim(dim: usize) -> Result<()> {
    if dim < 3 {
        return Err(Error::InvalidParameter(format!(
            "the X family is defined for D >= 3, got {dim} (at D = 2 the P+ weight vanishes and ||X||_Tr != 1)"
        )));
    }
    Ok(())
}

/// Closed-form construction from the projector family.
pub fn make_x(dim: usize) -> Result<XFamily> {
    require_x_dim(dim)?;
    let f = make_projector_family(dim)?;
    let n = x_normalizer(dim);
    let d = dim as i64;
    let r = |k: i64| n * k;
    let x = combine(&f, &[(r(d - 2), &f.p_plus), (r(-2), &f.p), (r(1), &f.q)]);
    let abs_x = combine(&f, &[(r(d - 2), &f.p_plus), (r(2), &f.p), (r(1), &f.q)]);
    let x_pt = combine(&f, &[(r(2), &f.s), (r(-1), &f.identity), (r(1), &f.q)]);
    let abs_x_pt_abs = combine(&f, &[(r(2), &f.s), (r(1), &f.identity), (r(-1), &f.q)]);
    let abs_x_pt_abs_pt = combine(&f, &[(r(d), &f.p_plus), (r(1), &f.q)]);
    let abs_x_pt = matrix::partial_transpose(&abs_x, &[1])?;
    Ok(XFamily { dim, x, abs_x, abs_x_pt, x_pt, abs_x_pt_abs, abs_x_pt_abs_pt, normalizer: n })
}

impl XFamily {
    /// Second construction path: only `X` is taken from the closed form, everything
    /// else comes from numeric absolute values and partial transposes.
    pub fn from_numeric(dim: usize) -> Result<XFamily> {
        let closed = make_x(dim)?;
        let x = closed.x;
        let abs_x = matrix::matrix_abs(&x)?;
        let abs_x_pt = matrix::partial_transpose(&abs_x, &[1])?;
        let x_pt = matrix::partial_transpose(&x, &[1])?;
        let abs_x_pt_abs = matrix::matrix_abs(&x_pt)?;
        let abs_x_pt_abs_pt = matrix::partial_transpose(&abs_x_pt_abs, &[1])?;
        Ok(XFamily { dim, x, abs_x, abs_x_pt, x_pt, abs_x_pt_abs, abs_x_pt_abs_pt, normalizer: closed.normalizer })
    }

    /// `Tr|X^{T_B'}|^{T_B'} = D² / (D² + 2D - 4)`.
    pub fn middle_block_trace(&self) -> Rational {
        let d = self.dim as i64;
        self.normalizer * (d * d)
    }
}

/// A state on key part `C^d ⊗ C^d` and shield `C^{d_A'} ⊗ C^{d_B'}`, ordered `[A, B, A', B']`.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyShieldState {
    rho: Operator,
}

impl KeyShieldState {
    pub fn new(rho: Operator) -> Result<Self> {
        let dims = rho.dims();
        if dims.len() != 4 || dims[0] != dims[1] {
            return Err(Error::DimensionMismatch(format!(
                "key/shield state needs dims [d, d, dA', dB'], got {dims:?}"
            )));
        }
        Ok(KeyShieldState { rho })
    }

    /// Assembles a state from shield-sized blocks `A_{ij,kl}`; `None` blocks are zero.
    pub fn from_blocks(
        key_dim: usize,
        shield_dims: (usize, usize),
        block: impl Fn(usize, usize, usize, usize) -> Option<Operator>,
    ) -> Result<Self> {
        let d = key_dim;
        let shield = shield_dims.0 * shield_dims.1;
        let mut data = nalgebra::DMatrix::zeros(d * d * shield, d * d * shield);
        for row in 0..d * d {
            for col in 0..d * d {
                if let Some(b) = block(row / d, row % d, col / d, col % d) {
                    if b.dim() != shield {
                        return Err(Error::DimensionMismatch(format!(
                            "block of side {} for shield of side {shield}",
                            b.dim()
                        )));
                    }
                    data.view_mut((row * shield, col * shield), (shield, shield)).copy_from(b.data());
                }
            }
        }
        KeyShieldState::new(Operator::new(vec![d, d, shield_dims.0, shield_dims.1], data)?)
    }

    pub fn rho(&self) -> &Operator {
        &self.rho
    }

    pub fn into_rho(self) -> Operator {
        self.rho
    }

    pub fn key_dim(&self) -> usize {
        self.rho.dims()[0]
    }

    pub fn shield_dims(&self) -> (usize, usize) {
        (self.rho.dims()[2], self.rho.dims()[3])
    }

    pub fn shield_dim(&self) -> usize {
        self.rho.dims()[2] * self.rho.dims()[3]
    }

    /// The shield operator `A_{ij,kl}` multiplying `|ij><kl|` on the key.
    pub fn block(&self, i: usize, j: usize, k: usize, l: usize) -> Operator {
        let d = self.key_dim();
        let s = self.shield_dim();
        let (row, col) = ((i * d + j) * s, (k * d + l) * s);
        let data = self.rho.data().view((row, col), (s, s)).clone_owned();
        Operator::new(vec![self.rho.dims()[2], self.rho.dims()[3]], data).expect("block matches shield dims")
    }

    /// Hermitian, unit trace and PSD within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        matrix::check_density(&self.rho, tol)
    }
}

/// `(1/4)(D² + 2D - 4)/(D² + D - 2)`; equals 11/40 at D = 3.
pub fn rho_prefactor(dim: usize) -> Result<Rational> {
    require_x_dim(dim)?;
    let d = dim as i64;
    Ok(Rational::new(d * d + 2 * d - 4, 4 * (d * d + d - 2)))
}

/// The 2D⊗2D state with corner blocks `|X_D|`, coherences `X_D` and middle blocks
/// `|X_D^{T_B'}|^{T_B'}`.
pub fn make_rho(dim: usize) -> Result<KeyShieldState> {
    let x = make_x(dim)?;
    let c = ratio_to_f64(rho_prefactor(dim)?);
    KeyShieldState::from_blocks(2, (dim, dim), |i, j, k, l| match ((i, j), (k, l)) {
        ((0, 0), (0, 0)) | ((1, 1), (1, 1)) => Some(x.abs_x.scale(c)),
        ((0, 0), (1, 1)) | ((1, 1), (0, 0)) => Some(x.x.scale(c)),
        ((0, 1), (0, 1)) | ((1, 0), (1, 0)) => Some(x.abs_x_pt_abs_pt.scale(c)),
        _ => None,
    })
}

/// The partial transpose over `BB'` of [`make_rho`], assembled block by block
/// from `|X|^{T_B'}`, `|X^{T_B'}|` and `X^{T_B'}` instead of by transposing.
pub fn rho_partial_transpose_blocks(dim: usize) -> Result<KeyShieldState> {
    let x = make_x(dim)?;
    let c = ratio_to_f64(rho_prefactor(dim)?);
    KeyShieldState::from_blocks(2, (dim, dim), |i, j, k, l| match ((i, j), (k, l)) {
        ((0, 0), (0, 0)) | ((1, 1), (1, 1)) => Some(x.abs_x_pt.scale(c)),
        ((0, 1), (0, 1)) | ((1, 0), (1, 0)) => Some(x.abs_x_pt_abs.scale(c)),
        ((0, 1), (1, 0)) | ((1, 0), (0, 1)) => Some(x.x_pt.scale(c)),
        _ => None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PptReport {
    pub min_eigenvalue: f64,
    pub is_ppt: bool,
}

/// Smallest eigenvalue of the partial transpose over Bob's systems `B` and `B'`.
pub fn check_ppt(state: &KeyShieldState, tol: f64) -> Result<PptReport> {
    let pt = matrix::partial_transpose(state.rho(), &[1, 3])?;
    let min_eigenvalue = matrix::min_eigenvalue(&pt)?;
    Ok(PptReport { min_eigenvalue, is_ppt: min_eigenvalue >= -tol })
}
