//! Private states and the classical-classical-quantum picture of a key/shield state.
//!
//! Eve is granted the whole purifying system. A state is measured on its key
//! part `AB` in a product basis; what Eve holds conditioned on each outcome pair
//! decides whether the resulting key is secure.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, Operator, C64};
use crate::random;
use crate::states::{self, KeyShieldState};

/// Eigenvalues at or below this are dropped from the canonical purification.
pub const PURIFICATION_CUTOFF: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-12;

fn require_unitary(u: &Operator, tol: f64) -> Result<()> {
    let deviation = u.unitarity_error();
    if deviation > tol {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(())
}

/// Local bases `{|e_i^(A)>}` and `{|e_j^(B)>}`, stored as unitaries whose columns are the basis kets.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductBasis {
    alice: Operator,
    bob: Operator,
}

impl ProductBasis {
    pub fn new(alice: Operator, bob: Operator) -> Result<Self> {
        if alice.dim() != bob.dim() {
            return Err(Error::DimensionMismatch(format!(
                "Alice basis of size {} vs Bob basis of size {}",
                alice.dim(),
                bob.dim()
            )));
        }
        require_unitary(&alice, UNITARY_TOL)?;
        require_unitary(&bob, UNITARY_TOL)?;
        let d = alice.dim();
        Ok(ProductBasis { alice: alice.with_dims(vec![d])?, bob: bob.with_dims(vec![d])? })
    }

    pub fn standard(d: usize) -> Self {
        ProductBasis { alice: Operator::identity(vec![d]), bob: Operator::identity(vec![d]) }
    }

    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        ProductBasis { alice: random::unitary(vec![d], rng), bob: random::unitary(vec![d], rng) }
    }

    pub fn d(&self) -> usize {
        self.alice.dim()
    }

    pub fn alice(&self) -> &Operator {
        &self.alice
    }

    pub fn bob(&self) -> &Operator {
        &self.bob
    }

    /// `E_A ⊗ E_B ⊗ I_shield`, mapping `|ij>|s>` to `|e_i e_j>|s>`.
    fn key_rotation(&self, shield_dims: (usize, usize)) -> Operator {
        let key = matrix::tensor(&self.alice, &self.bob);
        matrix::tensor(&key, &Operator::identity(vec![shield_dims.0, shield_dims.1]))
    }

    fn is_standard(&self) -> bool {
        let id = Operator::identity(vec![self.d()]);
        self.alice == id && self.bob == id
    }
}

/// A pure state on the system followed by an Eve register.
#[derive(Clone, Debug)]
pub struct Purification {
    /// Amplitudes `M[x, m]`, so that `|Ψ> = Σ M[x,m] |x>|m>`.
    amplitudes: DMatrix<C64>,
    system_dims: Vec<usize>,
}

impl Purification {
    pub fn eve_dim(&self) -> usize {
        self.amplitudes.ncols()
    }

    /// `M[x, m]`, rows indexing the system and columns the Eve register.
    pub fn amplitudes(&self) -> &DMatrix<C64> {
        &self.amplitudes
    }

    /// `(u ⊗ I_E)|Ψ>` for an operator `u` on the system; Eve's frame is untouched.
    pub fn apply(&self, u: &Operator) -> Result<Purification> {
        if u.dims() != self.system_dims.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "operator on {:?} applied to a purification of {:?}",
                u.dims(),
                self.system_dims
            )));
        }
        Ok(Purification {
            amplitudes: matrix::matmul(u.data(), &self.amplitudes),
            system_dims: self.system_dims.clone(),
        })
    }

    /// The ket with the Eve register as the last (least significant) subsystem.
    pub fn ket(&self) -> DVector<C64> {
        let (n, r) = self.amplitudes.shape();
        DVector::from_fn(n * r, |idx, _| self.amplitudes[(idx / r, idx % r)])
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = self.system_dims.clone();
        dims.push(self.eve_dim());
        dims
    }

    pub fn projector(&self) -> Operator {
        Operator::projector(self.dims(), &self.ket()).expect("ket matches dims")
    }
}

/// Canonical purification `Σ_m sqrt(λ_m) |v_m>|m>`, eigenvalues descending,
/// eigenvalues `<= 1e-10` dropped.
pub fn purify(rho: &Operator) -> Result<Purification> {
    matrix::check_density(rho, PURIFICATION_CUTOFF)?;
    let spectrum = matrix::hermitian_eig(rho)?;
    let kept: Vec<usize> =
        (0..spectrum.eigenvalues.len()).filter(|&m| spectrum.eigenvalues[m] > PURIFICATION_CUTOFF).collect();
    let n = rho.dim();
    let amplitudes = DMatrix::from_fn(n, kept.len(), |x, col| {
        let m = kept[col];
        spectrum.eigenvectors[(x, m)] * spectrum.eigenvalues[m].sqrt()
    });
    Ok(Purification { amplitudes, system_dims: rho.dims().to_vec() })
}

/// Outcome distribution of a key measurement and Eve's state conditioned on each outcome.
#[derive(Clone, Debug)]
pub struct CcqState {
    pub d: usize,
    /// `p[i][j]`: probability that Alice gets `i` and Bob gets `j`.
    pub p: Vec<Vec<f64>>,
    /// Normalized Eve states; `None` where the outcome has zero probability.
    pub eve_states: Vec<Vec<Option<Operator>>>,
    pub eve_dim: usize,
}

/// Outcomes with probability at or below this carry no Eve state.
const OUTCOME_CUTOFF: f64 = 1e-14;

/// Measures the purified key part in `basis` and keeps Eve's conditional states.
pub fn ccq(state: &KeyShieldState, basis: &ProductBasis) -> Result<CcqState> {
    let d = state.key_dim();
    if basis.d() != d {
        return Err(Error::DimensionMismatch(format!("basis of dimension {} for key of dimension {d}", basis.d())));
    }
    let purification = purify(state.rho())?;
    let amplitudes = if basis.is_standard() {
        purification.amplitudes
    } else {
        matrix::matmul(&basis.key_rotation(state.shield_dims()).data().adjoint(), &purification.amplitudes)
    };
    let shield = state.shield_dim();
    let eve_dim = amplitudes.ncols();
    let mut p = vec![vec![0.0; d]; d];
    let mut eve_states = vec![vec![None; d]; d];
    for i in 0..d {
        for j in 0..d {
            let k = amplitudes.rows((i * d + j) * shield, shield);
            let unnormalized = k.transpose() * k.map(|z| z.conj());
            let weight = unnormalized.trace().re;
            p[i][j] = weight;
            if weight > OUTCOME_CUTOFF {
                let eve = Operator::new(vec![eve_dim], unnormalized / C64::new(weight, 0.0))?;
                eve_states[i][j] = Some(eve);
            }
        }
    }
    Ok(CcqState { d, p, eve_states, eve_dim })
}

impl CcqState {
    /// `Σ_ij p_ij ρ_E^{ij}`, Eve's unconditional state.
    pub fn eve_marginal(&self) -> Operator {
        let mut acc = Operator::zeros(vec![self.eve_dim]);
        for (i, j, eve) in self.outcomes() {
            acc = acc.add(&eve.scale(self.p[i][j])).expect("Eve states share dims");
        }
        acc
    }

    fn outcomes(&self) -> impl Iterator<Item = (usize, usize, &Operator)> {
        self.eve_states
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().filter_map(move |(j, e)| e.as_ref().map(|e| (i, j, e))))
    }

    /// Largest trace distance between Eve states of two outcomes with `p > min_prob`.
    pub fn max_pairwise_eve_distance(&self, min_prob: f64) -> f64 {
        let live: Vec<&Operator> =
            self.outcomes().filter(|(i, j, _)| self.p[*i][*j] > min_prob).map(|(_, _, e)| e).collect();
        let mut worst: f64 = 0.0;
        for a in 0..live.len() {
            for b in (a + 1)..live.len() {
                worst = worst.max(matrix::trace_distance(live[a], live[b]).expect("Eve states share dims"));
            }
        }
        worst
    }

    pub fn alice_marginal(&self) -> Vec<f64> {
        self.p.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn bob_marginal(&self) -> Vec<f64> {
        (0..self.d).map(|j| self.p.iter().map(|row| row[j]).sum()).collect()
    }

    /// `I(A:B)` in bits over the outcome distribution.
    pub fn mutual_information_ab(&self) -> f64 {
        matrix::shannon_entropy(self.alice_marginal()) + matrix::shannon_entropy(self.bob_marginal())
            - matrix::shannon_entropy(self.p.iter().flatten().copied())
    }

    /// Holevo quantity `I(A:E) = S(ρ_E) - Σ_a p_a S(ρ_E^a)` in bits.
    pub fn mutual_information_ae(&self) -> Result<f64> {
        let p_a = self.alice_marginal();
        let mut conditional_entropy = 0.0;
        for (a, &pa) in p_a.iter().enumerate() {
            if pa <= OUTCOME_CUTOFF {
                continue;
            }
            let mut rho_a = Operator::zeros(vec![self.eve_dim]);
            for (b, eve) in self.eve_states[a].iter().enumerate() {
                if let Some(eve) = eve {
                    rho_a = rho_a.add(&eve.scale(self.p[a][b] / pa))?;
                }
            }
            conditional_entropy += pa * matrix::von_neumann_entropy(&rho_a)?;
        }
        Ok(matrix::von_neumann_entropy(&self.eve_marginal())? - conditional_entropy)
    }
}

/// Secure when every pair of outcomes with `p > tol` leaves Eve in states at
/// trace distance at most `tol`, i.e. the ccq state is `p_AB ⊗ ρ_E`.
pub fn is_secure(c: &CcqState, tol: f64) -> bool {
    c.max_pairwise_eve_distance(tol) <= tol
}

/// One-way (Alice to Bob) Devetak–Winter rate `I(A:B) - I(A:E)` in bits.
pub fn dw_rate(c: &CcqState) -> Result<f64> {
    Ok(c.mutual_information_ab() - c.mutual_information_ae()?)
}

/// Controlled unitary `Σ_ij |e_i e_j><e_i e_j| ⊗ U_ij` acting on the shield.
#[derive(Clone, Debug)]
pub struct Twisting {
    d: usize,
    /// `U_ij` at index `i * d + j`.
    controls: Vec<Operator>,
}

impl Twisting {
    pub fn new(d: usize, controls: Vec<Operator>) -> Result<Self> {
        if controls.len() != d * d {
            return Err(Error::DimensionMismatch(format!("{} controls for a {d}x{d} key", controls.len())));
        }
        let dims = controls[0].dims().to_vec();
        for u in &controls {
            if u.dims() != dims.as_slice() {
                return Err(Error::DimensionMismatch("twisting controls act on different spaces".into()));
            }
            require_unitary(u, UNITARY_TOL)?;
        }
        Ok(Twisting { d, controls })
    }

    pub fn identity(d: usize, shield_dims: (usize, usize)) -> Self {
        let id = Operator::identity(vec![shield_dims.0, shield_dims.1]);
        Twisting { d, controls: vec![id; d * d] }
    }

    pub fn random<R: Rng + ?Sized>(d: usize, shield_dims: (usize, usize), rng: &mut R) -> Self {
        let controls = (0..d * d).map(|_| random::unitary(vec![shield_dims.0, shield_dims.1], rng)).collect();
        Twisting { d, controls }
    }

    pub fn control(&self, i: usize, j: usize) -> &Operator {
        &self.controls[i * self.d + j]
    }

    /// `U_ij -> U_ij^dag`.
    pub fn inverse(&self) -> Twisting {
        Twisting { d: self.d, controls: self.controls.iter().map(Operator::adjoint).collect() }
    }

    /// The full operator on `[A, B, A', B']`.
    pub fn operator(&self, basis: &ProductBasis) -> Operator {
        let sd = self.controls[0].dims();
        let shield_dims = (sd[0], sd[1]);
        let s = self.controls[0].dim();
        let d = self.d;
        let mut data = DMatrix::zeros(d * d * s, d * d * s);
        for (idx, u) in self.controls.iter().enumerate() {
            data.view_mut((idx * s, idx * s), (s, s)).copy_from(u.data());
        }
        let diagonal = Operator::new(vec![d, d, shield_dims.0, shield_dims.1], data).expect("block diagonal");
        if basis.is_standard() {
            diagonal
        } else {
            diagonal.conjugate_by(&basis.key_rotation(shield_dims)).expect("dims match")
        }
    }
}

/// `U ρ U^dag` for the twisting `U` in the given key basis.
pub fn apply_twisting(state: &KeyShieldState, t: &Twisting, basis: &ProductBasis) -> Result<KeyShieldState> {
    if t.d != state.key_dim() || basis.d() != state.key_dim() || t.controls[0].dim() != state.shield_dim() {
        return Err(Error::DimensionMismatch(format!(
            "twisting for key {} / shield {} applied to key {} / shield {}",
            t.d,
            t.controls[0].dim(),
            state.key_dim(),
            state.shield_dim()
        )));
    }
    KeyShieldState::new(state.rho().conjugate_by(&t.operator(basis))?)
}

/// `γ = (1/d) Σ_ij |e_i e_i><e_j e_j| ⊗ U_i σ U_j^dag`.
#[derive(Clone, Debug)]
pub struct PrivateState {
    basis: ProductBasis,
    sigma: Operator,
    unitaries: Vec<Operator>,
}

pub fn make_pdit(basis: ProductBasis, sigma: Operator, unitaries: Vec<Operator>) -> Result<PrivateState> {
    if sigma.dims().len() != 2 {
        return Err(Error::DimensionMismatch(format!("shield state needs dims [dA', dB'], got {:?}", sigma.dims())));
    }
    matrix::check_density(&sigma, 1e-12)?;
    if unitaries.len() != basis.d() {
        return Err(Error::DimensionMismatch(format!("{} unitaries for key dimension {}", unitaries.len(), basis.d())));
    }
    for u in &unitaries {
        if u.dims() != sigma.dims() {
            return Err(Error::DimensionMismatch("pdit unitary does not act on the shield".into()));
        }
        require_unitary(u, 1e-10)?;
    }
    Ok(PrivateState { basis, sigma, unitaries })
}

impl PrivateState {
    pub fn random<R: Rng + ?Sized>(d: usize, shield_dims: (usize, usize), rng: &mut R) -> Self {
        let sigma = random::density(vec![shield_dims.0, shield_dims.1], rng);
        let unitaries = (0..d).map(|_| random::unitary(vec![shield_dims.0, shield_dims.1], rng)).collect();
        PrivateState { basis: ProductBasis::standard(d), sigma, unitaries }
    }

    pub fn with_basis(mut self, basis: ProductBasis) -> Result<Self> {
        if basis.d() != self.d() {
            return Err(Error::DimensionMismatch("basis dimension differs from key dimension".into()));
        }
        self.basis = basis;
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.basis.d()
    }

    pub fn basis(&self) -> &ProductBasis {
        &self.basis
    }

    pub fn sigma(&self) -> &Operator {
        &self.sigma
    }

    pub fn unitaries(&self) -> &[Operator] {
        &self.unitaries
    }

    pub fn shield_dims(&self) -> (usize, usize) {
        (self.sigma.dims()[0], self.sigma.dims()[1])
    }

    /// The pdit as a key/shield density matrix.
    pub fn assemble(&self) -> KeyShieldState {
        let d = self.d();
        let scale = 1.0 / d as f64;
        let standard = KeyShieldState::from_blocks(d, self.shield_dims(), |i, j, k, l| {
            (i == j && k == l).then(|| {
                let u_i = &self.unitaries[i];
                let u_k = &self.unitaries[k];
                Operator::new(
                    self.sigma.dims().to_vec(),
                    matrix::matmul(&matrix::matmul(u_i.data(), self.sigma.data()), &u_k.data().adjoint()),
                )
                .expect("shield dims")
                .scale(scale)
            })
        })
        .expect("blocks match shield");
        self.rotate_key(standard)
    }

    /// `P+^(d) ⊗ σ` with `P+` written in this pdit's basis.
    pub fn basic_pdit(&self) -> KeyShieldState {
        let d = self.d();
        let p_plus = states::max_entangled_projector(d);
        let rho = matrix::tensor(&p_plus, &self.sigma);
        self.rotate_key(KeyShieldState::new(rho).expect("[d, d, dA', dB']"))
    }

    /// Twisting with `U_ii = U_i^dag` and identity elsewhere; takes the pdit to its basic form.
    pub fn untwisting(&self) -> Twisting {
        let d = self.d();
        let id = Operator::identity(self.sigma.dims().to_vec());
        let controls = (0..d * d)
            .map(|idx| if idx / d == idx % d { self.unitaries[idx / d].adjoint() } else { id.clone() })
            .collect();
        Twisting { d, controls }
    }

    fn rotate_key(&self, state: KeyShieldState) -> KeyShieldState {
        if self.basis.is_standard() {
            return state;
        }
        let rot = self.basis.key_rotation(self.shield_dims());
        KeyShieldState::new(state.rho().conjugate_by(&rot).expect("dims match")).expect("dims unchanged")
    }
}

/// `p1 γ1 + (1 - p1) σ_x^A γ2 σ_x^A` for two private bits.
pub fn flipped_pbit_mixture(gamma1: &PrivateState, gamma2: &PrivateState, p1: f64) -> Result<KeyShieldState> {
    if gamma1.d() != 2 || gamma2.d() != 2 {
        return Err(Error::DimensionMismatch("both private states must be private bits (d = 2)".into()));
    }
    if gamma1.shield_dims() != gamma2.shield_dims() {
        return Err(Error::DimensionMismatch(format!(
            "shield dims {:?} vs {:?}",
            gamma1.shield_dims(),
            gamma2.shield_dims()
        )));
    }
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::InvalidParameter(format!("mixture weight p1 = {p1} outside [0, 1]")));
    }
    let (da, db) = gamma1.shield_dims();
    let sigma_x = Operator::from_real(vec![2], &[0.0, 1.0, 1.0, 0.0])?;
    let flip = matrix::tensor(&sigma_x, &Operator::identity(vec![2, da, db]));
    let flipped = gamma2.assemble().rho().conjugate_by(&flip)?;
    let rho = gamma1.assemble().rho().scale(p1).add(&flipped.scale(1.0 - p1))?;
    KeyShieldState::new(rho)
}

/// Binary entropy `h(p)` in bits.
pub fn binary_entropy(p: f64) -> f64 {
    matrix::shannon_entropy([p, 1.0 - p])
}

/// How close a two-qubit-key state is to the pbit-mixture form
/// `p1 γ1 + p2 σ_x^A γ2 σ_x^A`.
///
/// The correlated (`00`, `11`) and anticorrelated (`01`, `10`) key sectors are
/// renormalized separately; a state of the mixture form has a sector coherence
/// (`||A_{00,11}||_Tr`, resp. `||A_{01,10}||_Tr`) of exactly 1/2 in each sector with
/// nonzero weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MixtureFit {
    pub correlated_weight: f64,
    pub correlated_coherence: f64,
    pub anticorrelated_weight: f64,
    pub anticorrelated_coherence: f64,
}

pub fn pbit_mixture_fit(state: &KeyShieldState) -> Result<MixtureFit> {
    if state.key_dim() != 2 {
        return Err(Error::DimensionMismatch("pbit mixture fit needs a qubit key".into()));
    }
    let sector = |a: (usize, usize), b: (usize, usize)| {
        let weight = state.block(a.0, a.1, a.0, a.1).trace().re + state.block(b.0, b.1, b.0, b.1).trace().re;
        let coherence = matrix::trace_norm(&state.block(a.0, a.1, b.0, b.1));
        (weight, if weight > 0.0 { coherence / weight } else { 0.0 })
    };
    let (correlated_weight, correlated_coherence) = sector((0, 0), (1, 1));
    let (anticorrelated_weight, anticorrelated_coherence) = sector((0, 1), (1, 0));
    Ok(MixtureFit { correlated_weight, correlated_coherence, anticorrelated_weight, anticorrelated_coherence })
}

/// On-disk description of a private state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PditFile {
    pub d: usize,
    pub shield_dims: [usize; 2],
    pub sigma: Operator,
    pub unitaries: Vec<Operator>,
    pub basis: BasisFile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisFile {
    pub alice: Operator,
    pub bob: Operator,
}

impl TryFrom<PditFile> for PrivateState {
    type Error = Error;

    fn try_from(file: PditFile) -> Result<Self> {
        if file.sigma.dims() != file.shield_dims.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "sigma dims {:?} differ from shield_dims {:?}",
                file.sigma.dims(),
                file.shield_dims
            )));
        }
        let basis = ProductBasis::new(file.basis.alice, file.basis.bob)?;
        if basis.d() != file.d {
            return Err(Error::DimensionMismatch(format!("basis dimension {} but d = {}", basis.d(), file.d)));
        }
        make_pdit(basis, file.sigma, file.unitaries)
    }
}

impl From<&PrivateState> for PditFile {
    fn from(pdit: &PrivateState) -> Self {
        let (da, db) = pdit.shield_dims();
        PditFile {
            d: pdit.d(),
            shield_dims: [da, db],
            sigma: pdit.sigma.clone(),
            unitaries: pdit.unitaries.clone(),
            basis: BasisFile { alice: pdit.basis.alice.clone(), bob: pdit.basis.bob.clone() },
        }
    }
}

/// Machine-readable summary of a ccq state.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CcqReport {
    pub p: Vec<Vec<f64>>,
    pub eve_pairwise_max_distance: f64,
    pub secure: bool,
    pub dw_rate: f64,
}

impl CcqReport {
    pub fn from_ccq(c: &CcqState, tol: f64) -> Result<Self> {
        Ok(CcqReport {
            p: c.p.clone(),
            eve_pairwise_max_distance: c.max_pairwise_eve_distance(tol),
            secure: is_secure(c, tol),
            dw_rate: dw_rate(c)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{partial_trace, tensor, trace_distance};
    use crate::random::seeded;

    fn ket(bits: &[usize]) -> DVector<C64> {
        let n = 1 << bits.len();
        let idx = bits.iter().fold(0, |acc, b| acc * 2 + b);
        DVector::from_fn(n, |i, _| C64::new((i == idx) as u8 as f64, 0.0))
    }

    /// `p|0111><0111| + (1-p)|1000><1000|` on `[A, B, A', B']`.
    fn eta(p: f64) -> KeyShieldState {
        let a = Operator::projector(vec![2, 2, 2, 2], &ket(&[0, 1, 1, 1])).unwrap();
        let b = Operator::projector(vec![2, 2, 2, 2], &ket(&[1, 0, 0, 0])).unwrap();
        KeyShieldState::new(a.scale(p).add(&b.scale(1.0 - p)).unwrap()).unwrap()
    }

    #[test]
    fn purify_pure_state() {
        let rho = Operator::basis_projector(vec![2], 0);
        let psi = purify(&rho).unwrap();
        assert_eq!(psi.eve_dim(), 1);
        assert!((psi.ket()[0].re.abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn purify_maximally_mixed_qubit() {
        let psi = purify(&Operator::identity(vec![2]).scale(0.5)).unwrap();
        assert_eq!(psi.eve_dim(), 2);
        // reduced state on Eve is maximally mixed too, so the ket is maximally entangled
        let eve = partial_trace(&psi.projector(), &[0]).unwrap();
        assert!(eve.max_abs_diff(&Operator::identity(vec![2]).scale(0.5)).unwrap() < 1e-14);
    }

    #[test]
    fn purify_rejects_non_states() {
        let not_psd = Operator::from_real(vec![2], &[1.5, 0.0, 0.0, -0.5]).unwrap();
        assert!(purify(&not_psd).is_err());
        assert!(purify(&Operator::identity(vec![2])).is_err());
    }

    #[test]
    fn eta_purification_matches_worked_example() {
        let p = 0.3;
        let psi = purify(eta(p).rho()).unwrap();
        assert_eq!(psi.eve_dim(), 2);
        let back = partial_trace(&psi.projector(), &[4]).unwrap();
        assert!(back.max_abs_diff(eta(p).rho()).unwrap() < 1e-12);
        // compare with √p|01110> + √(1-p)|10001> up to a unitary on Eve: the
        // system marginal of both is η, and the Eve marginals share a spectrum
        let reference =
            ket(&[0, 1, 1, 1, 0]) * C64::new(p.sqrt(), 0.0) + ket(&[1, 0, 0, 0, 1]) * C64::new((1.0 - p).sqrt(), 0.0);
        let reference = Operator::projector(vec![2, 2, 2, 2, 2], &reference).unwrap();
        let ref_marginal = partial_trace(&reference, &[4]).unwrap();
        assert!(ref_marginal.max_abs_diff(&back).unwrap() < 1e-12);
    }

    #[test]
    fn ccq_of_eta() {
        for p in [0.3, 0.5, 0.9] {
            let c = ccq(&eta(p), &ProductBasis::standard(2)).unwrap();
            assert!((c.p[0][1] - p).abs() < 1e-14 && (c.p[1][0] - (1.0 - p)).abs() < 1e-14);
            assert_eq!(c.p[0][0] + c.p[1][1], 0.0);
            let (e01, e10) = (c.eve_states[0][1].as_ref().unwrap(), c.eve_states[1][0].as_ref().unwrap());
            assert!((trace_distance(e01, e10).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_at_one_half_is_insecure_with_zero_rate() {
        let c = ccq(&eta(0.5), &ProductBasis::standard(2)).unwrap();
        assert!(!is_secure(&c, 1e-9));
        assert!(dw_rate(&c).unwrap().abs() < 1e-12);
    }

    #[test]
    fn basic_pbit_is_secure_with_unit_rate() {
        let mut rng = seeded(11);
        let sigma = random::density(vec![2, 2], &mut rng);
        let state = KeyShieldState::new(tensor(&states::max_entangled_projector(2), &sigma)).unwrap();
        let c = ccq(&state, &ProductBasis::standard(2)).unwrap();
        assert!((c.p[0][0] - 0.5).abs() < 1e-12 && c.p[0][1].abs() < 1e-12);
        assert!(is_secure(&c, 1e-9));
        assert!((dw_rate(&c).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ccq_of_rho3_block_traces() {
        let c = ccq(&states::make_rho(3).unwrap(), &ProductBasis::standard(2)).unwrap();
        assert!((c.p[0][0] - 11.0 / 40.0).abs() < 1e-12 && (c.p[1][1] - 11.0 / 40.0).abs() < 1e-12);
        assert!((c.p[0][1] - 9.0 / 40.0).abs() < 1e-12 && (c.p[1][0] - 9.0 / 40.0).abs() < 1e-12);
        let joint = c.eve_marginal();
        let direct =
            partial_trace(&purify(states::make_rho(3).unwrap().rho()).unwrap().projector(), &[0, 1, 2, 3]).unwrap();
        assert!(joint.max_abs_diff(&direct).unwrap() < 1e-10);
    }

    #[test]
    fn ccq_rejects_wrong_basis() {
        assert!(ccq(&states::make_rho(3).unwrap(), &ProductBasis::standard(3)).is_err());
    }

    #[test]
    fn identity_twisting_is_a_no_op() {
        let rho = states::make_rho(3).unwrap();
        let out = apply_twisting(&rho, &Twisting::identity(2, (3, 3)), &ProductBasis::standard(2)).unwrap();
        assert!(out.rho().max_abs_diff(rho.rho()).unwrap() < 1e-15);
        assert!(apply_twisting(&rho, &Twisting::identity(2, (2, 2)), &ProductBasis::standard(2)).is_err());
    }

    #[test]
    fn pdit_with_identity_unitaries_is_basic() {
        let mut rng = seeded(5);
        let sigma = random::density(vec![2, 3], &mut rng);
        let id = Operator::identity(vec![2, 3]);
        let pdit = make_pdit(ProductBasis::standard(3), sigma.clone(), vec![id.clone(), id.clone(), id]).unwrap();
        let expected = tensor(&states::max_entangled_projector(3), &sigma);
        assert!(pdit.assemble().rho().max_abs_diff(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn pdit_key_marginal_is_uniform_and_secure() {
        let mut rng = seeded(8);
        for d in 2..4 {
            let pdit = PrivateState::random(d, (2, 2), &mut rng).with_basis(ProductBasis::random(d, &mut rng)).unwrap();
            let gamma = pdit.assemble();
            gamma.validate(1e-12).unwrap();
            let c = ccq(&gamma, pdit.basis()).unwrap();
            for i in 0..d {
                assert!((c.p[i][i] - 1.0 / d as f64).abs() < 1e-12);
            }
            assert!(is_secure(&c, 1e-9));
            assert!((dw_rate(&c).unwrap() - (d as f64).log2()).abs() < 1e-9);
        }
    }

    #[test]
    fn untwisting_random_basis_pdit() {
        let mut rng = seeded(21);
        let pdit = PrivateState::random(2, (2, 2), &mut rng).with_basis(ProductBasis::random(2, &mut rng)).unwrap();
        let t = pdit.untwisting();
        let basic = apply_twisting(&pdit.assemble(), &t, pdit.basis()).unwrap();
        assert!(basic.rho().max_abs_diff(pdit.basic_pdit().rho()).unwrap() < 1e-10);
        let back = apply_twisting(&basic, &t.inverse(), pdit.basis()).unwrap();
        assert!(back.rho().max_abs_diff(pdit.assemble().rho()).unwrap() < 1e-10);
    }

    #[test]
    fn make_pdit_validation() {
        let sigma = Operator::identity(vec![2, 2]).scale(0.25);
        let id = Operator::identity(vec![2, 2]);
        assert!(make_pdit(ProductBasis::standard(2), sigma.clone(), vec![id.clone()]).is_err());
        assert!(make_pdit(ProductBasis::standard(2), sigma.scale(2.0), vec![id.clone(), id.clone()]).is_err());
        let not_unitary = id.scale(2.0);
        assert!(make_pdit(ProductBasis::standard(2), sigma, vec![id, not_unitary]).is_err());
    }

    #[test]
    fn mixture_endpoints() {
        let mut rng = seeded(2);
        let g1 = PrivateState::random(2, (2, 2), &mut rng);
        let g2 = PrivateState::random(2, (2, 2), &mut rng);
        let at_one = flipped_pbit_mixture(&g1, &g2, 1.0).unwrap();
        assert!(at_one.rho().max_abs_diff(g1.assemble().rho()).unwrap() < 1e-15);
        let at_zero = flipped_pbit_mixture(&g1, &g2, 0.0).unwrap();
        let c = ccq(&at_zero, &ProductBasis::standard(2)).unwrap();
        assert!(c.p[0][0].abs() < 1e-12 && c.p[1][1].abs() < 1e-12);
        assert!((c.p[0][1] + c.p[1][0] - 1.0).abs() < 1e-12);
        assert!(flipped_pbit_mixture(&g1, &g2, 1.5).is_err());
        let g3 = PrivateState::random(2, (2, 3), &mut rng);
        assert!(flipped_pbit_mixture(&g1, &g3, 0.5).is_err());
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.75) - (2.0 - 0.75 * 3f64.log2())).abs() < 1e-15);
    }

    #[test]
    fn mixture_fit_of_rho3() {
        let fit = pbit_mixture_fit(&states::make_rho(3).unwrap()).unwrap();
        assert!((fit.correlated_weight - 11.0 / 20.0).abs() < 1e-12);
        assert!((fit.correlated_coherence - 0.5).abs() < 1e-12);
        assert!((fit.anticorrelated_weight - 9.0 / 20.0).abs() < 1e-12);
        assert_eq!(fit.anticorrelated_coherence, 0.0);
    }

    #[test]
    fn pdit_file_round_trip() {
        let mut rng = seeded(4);
        let pdit = PrivateState::random(2, (2, 2), &mut rng);
        let text = serde_json::to_string(&PditFile::from(&pdit)).unwrap();
        let back = PrivateState::try_from(serde_json::from_str::<PditFile>(&text).unwrap()).unwrap();
        assert!(back.assemble().rho().max_abs_diff(pdit.assemble().rho()).unwrap() < 1e-15);
    }
}
