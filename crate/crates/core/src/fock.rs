//! Truncated Fock-space oracle.
//!
//! Everything here is computed from photon-number amplitudes and matrix
//! exponentials, without the closed-form coherent overlap, so it can check
//! the coherent algebra independently. The beam splitter is `exp(iĜ)` for a
//! quadratic generator Ĝ that conserves total photon number; it is stored as
//! one dense block per photon-number sector.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coherent::{ln_factorial, C64};
use crate::error::{Error, Result};
use crate::protocol::{
    correction_for_pair, enumerate_outcomes, CorrectionOp, DetectionEvent, Leg, ProtocolParams,
};

/// Tail budget for embedding coherent states.
pub const DEFAULT_FOCK_TAIL: f64 = 1e-12;

/// Extra levels used when exponentiating a displacement generator.
const DISPLACEMENT_BUFFER: usize = 40;

/// Truncation dimension `ceil(b² + 8b + 12)` for amplitudes up to `b`.
pub fn trunc_dim(beta_max: f64) -> usize {
    let b = beta_max.abs();
    (b * b + 8.0 * b + 12.0).ceil() as usize
}

/// Σ_{n≥d} e^{−μ} μⁿ/n!, summed upward from `d` in log space.
pub fn poisson_tail(mean: f64, d: usize) -> f64 {
    if mean == 0.0 {
        return if d == 0 { 1.0 } else { 0.0 };
    }
    let ln_mu = mean.ln();
    let mut total = 0.0;
    let mut n = d as u32;
    loop {
        let term = (-mean + n as f64 * ln_mu - ln_factorial(n)).exp();
        total += term;
        if (n as f64 > mean && term < total * 1e-17) || n > d as u32 + 10_000 {
            break;
        }
        n += 1;
    }
    total
}

/// Single-mode vector over photon numbers `0..dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    pub coeffs: Vec<C64>,
}

impl FockVector {
    pub fn zeros(dim: usize) -> Self {
        FockVector {
            coeffs: vec![C64::new(0.0, 0.0); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// ⟨self|other⟩ over the common leading dimensions.
    pub fn inner(&self, other: &FockVector) -> C64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&mut self, s: C64) {
        for c in &mut self.coeffs {
            *c *= s;
        }
    }

    pub fn add_scaled(&mut self, s: C64, other: &FockVector) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += s * o;
        }
    }

    pub fn resized(&self, dim: usize) -> FockVector {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(dim, C64::new(0.0, 0.0));
        FockVector { coeffs }
    }

    /// Phase shift by π: `cₙ ↦ (−1)ⁿ cₙ`.
    pub fn phase_flip(&self) -> FockVector {
        FockVector {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(n, &c)| if n % 2 == 0 { c } else { -c })
                .collect(),
        }
    }
}

/// |⟨x|y⟩|² / (‖x‖²‖y‖²).
pub fn fock_fidelity(x: &FockVector, y: &FockVector) -> f64 {
    let num = x.inner(y).norm_sqr();
    let den = x.norm_sqr() * y.norm_sqr();
    (num / den).clamp(0.0, 1.0)
}

/// Coherent state |β⟩ truncated to `d` levels, by the recurrence
/// `c_{n} = c_{n−1}·β/√n`.
pub fn coherent_to_fock(beta: C64, d: usize, budget: f64) -> Result<FockVector> {
    let mean = beta.norm_sqr();
    let tail = poisson_tail(mean, d);
    if tail > budget {
        let mut suggested = d.max(1);
        while poisson_tail(mean, suggested) > budget {
            suggested += 1;
        }
        return Err(Error::TailBudget {
            beta: beta.norm(),
            dim: d,
            tail,
            budget,
            suggested,
        });
    }
    let mut coeffs = Vec::with_capacity(d);
    let mut c = C64::new((-mean / 2.0).exp(), 0.0);
    for n in 0..d {
        if n > 0 {
            c = c * beta / (n as f64).sqrt();
        }
        coeffs.push(c);
    }
    Ok(FockVector { coeffs })
}

/// Two-mode beam splitter `exp(iĜ)` on a `d × d` truncation.
///
/// With `M = [[1,1],[1,−1]]/√2`, `Ĝ = (π/2)(N̂ − Σ M_jk a_j†a_k)`; since
/// `exp(iπ/2·(I − M)) = M`, coherent pairs map as `|β⟩ ↦ |Mβ⟩`. Sectors of
/// total photon number `N < d` are exact; higher sectors are truncated.
#[derive(Clone, Debug)]
pub struct BsUnitary {
    d: usize,
    /// Sector N: (lowest n_u in the sector, unitary over n_u ascending).
    blocks: Vec<(usize, DMatrix<C64>)>,
}

impl BsUnitary {
    pub fn new(d: usize) -> Self {
        assert!(d >= 2, "beam splitter needs at least two levels");
        let mut blocks = Vec::with_capacity(2 * d - 1);
        for total in 0..(2 * d - 1) {
            let lo = total.saturating_sub(d - 1);
            let hi = total.min(d - 1);
            let size = hi - lo + 1;
            let g = DMatrix::<f64>::from_fn(size, size, |r, c| {
                let n = lo + r;
                let m = total - n;
                let n2 = lo + c;
                let h = if r == c {
                    (n as f64 - m as f64) * FRAC_1_SQRT_2
                } else if n2 + 1 == n {
                    // a_u† a_v: |n2, m+1⟩ → |n2+1, m⟩
                    ((n as f64) * (m + 1) as f64).sqrt() * FRAC_1_SQRT_2
                } else if n2 == n + 1 {
                    // a_v† a_u: |n+1, m−1⟩ → |n, m⟩
                    ((n2 as f64) * (m as f64)).sqrt() * FRAC_1_SQRT_2
                } else {
                    0.0
                };
                let diag = if r == c { total as f64 } else { 0.0 };
                PI / 2.0 * (diag - h)
            });
            let eig = SymmetricEigen::new(g);
            let v = eig.eigenvectors.map(|x| C64::new(x, 0.0));
            let phases = DMatrix::from_diagonal(&DVector::from_iterator(
                size,
                eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, l)),
            ));
            let u = &v * phases * v.transpose();
            blocks.push((lo, u));
        }
        BsUnitary { d, blocks }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Applies the unitary (or its adjoint) to a row-major `d²` vector
    /// indexed by `n_u·d + n_v`.
    fn apply_impl(&self, v: &[C64], adjoint: bool) -> Vec<C64> {
        let d = self.d;
        assert_eq!(v.len(), d * d);
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        for (total, (lo, u)) in self.blocks.iter().enumerate() {
            let size = u.nrows();
            let idx = |r: usize| {
                let n = lo + r;
                n * d + (total - n)
            };
            for r in 0..size {
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..size {
                    let m = if adjoint { u[(c, r)].conj() } else { u[(r, c)] };
                    acc += m * v[idx(c)];
                }
                out[idx(r)] = acc;
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.apply_impl(v, false)
    }

    pub fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.apply_impl(v, true)
    }

    /// Dense `d² × d²` matrix; only sensible for small `d`.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let d = self.d;
        let mut m = DMatrix::from_element(d * d, d * d, C64::new(0.0, 0.0));
        for (total, (lo, u)) in self.blocks.iter().enumerate() {
            for r in 0..u.nrows() {
                for c in 0..u.ncols() {
                    let (nr, nc) = (lo + r, lo + c);
                    m[(nr * d + total - nr, nc * d + total - nc)] = u[(r, c)];
                }
            }
        }
        m
    }
}

/// Row-major product vector `x ⊗ y`.
pub fn product(x: &FockVector, y: &FockVector) -> Vec<C64> {
    let d = x.dim();
    assert_eq!(d, y.dim());
    let mut v = Vec::with_capacity(d * d);
    for a in &x.coeffs {
        for b in &y.coeffs {
            v.push(a * b);
        }
    }
    v
}

/// `exp(δa† − δ*a)` on `dim` levels, via the eigenbasis of the Hermitian
/// matrix `i(δa† − δ*a)`.
pub fn displacement_matrix(delta: C64, dim: usize) -> DMatrix<C64> {
    let i = C64::new(0.0, 1.0);
    let h = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c + 1 {
            // δ a†: |c⟩ → √(c+1)|c+1⟩
            i * delta * ((c + 1) as f64).sqrt()
        } else if c == r + 1 {
            // −δ* a: |c⟩ → √c|c−1⟩
            -i * delta.conj() * (c as f64).sqrt()
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let eig = SymmetricEigen::new(h);
    let v = eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        dim,
        eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -l)),
    ));
    &v * phases * v.adjoint()
}

pub fn apply_matrix(m: &DMatrix<C64>, v: &FockVector) -> FockVector {
    let x = DVector::from_iterator(m.ncols(), v.resized(m.ncols()).coeffs);
    FockVector {
        coeffs: (m * x).iter().copied().collect(),
    }
}

/// Per-leg Fock oracle for one α and one set of information states.
#[derive(Clone, Debug)]
pub struct FockOracle {
    pub alpha: f64,
    /// Per-mode truncation of the beam-splitter space.
    pub d: usize,
    /// Truncation of receiver vectors.
    pub d_receiver: usize,
    /// Dimension used for corrections and fidelities.
    pub d_big: usize,
    bs: BsUnitary,
    displacement: DMatrix<C64>,
    /// ±α on the receiver, in `d_big` levels.
    receiver: [FockVector; 2],
}

impl FockOracle {
    /// Builds the oracle for amplitude α with detector counts up to `cutoff`.
    pub fn new(alpha: f64, cutoff: u32, budget: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        let d = trunc_dim(2.0 * alpha).max(cutoff as usize + 2);
        let shift = PI / (2.0 * alpha);
        let d_receiver = trunc_dim(alpha + shift).max(d);
        let d_big = d_receiver + DISPLACEMENT_BUFFER;
        let a = C64::new(alpha, 0.0);
        Ok(FockOracle {
            alpha,
            d,
            d_receiver,
            d_big,
            bs: BsUnitary::new(d),
            displacement: displacement_matrix(C64::new(0.0, shift), d_big),
            receiver: [
                coherent_to_fock(a, d_big, budget)?,
                coherent_to_fock(-a, d_big, budget)?,
            ],
        })
    }

    pub fn unitary(&self) -> &BsUnitary {
        &self.bs
    }

    fn coherent(&self, beta: C64, d: usize) -> FockVector {
        // the constructor already checked the budget for these amplitudes
        coherent_to_fock(beta, d, f64::INFINITY).expect("no budget")
    }

    /// Everything needed to evaluate any count pair of one leg.
    pub fn leg(&self, x0: f64, x1: f64) -> OracleLeg<'_> {
        let a = C64::new(self.alpha, 0.0);
        let mut info = self.coherent(a, self.d);
        info.scale(C64::new(x0, 0.0));
        info.add_scaled(C64::new(x1, 0.0), &self.coherent(-a, self.d));
        info.scale(C64::new(1.0 / info.norm_sqr().sqrt(), 0.0));

        let vp = self.coherent(a, self.d);
        let vm = self.coherent(-a, self.d);
        // Bell pair Σ_s v(sα) ⊗ v(sα); its squared norm from Fock overlaps
        let ov = vp.inner(&vm);
        let bell_norm_sqr = 2.0 * vp.norm_sqr() * vp.norm_sqr() + 2.0 * (ov * ov).re;
        let bell = 1.0 / bell_norm_sqr.sqrt();

        let outputs = [&vp, &vm].map(|v| self.bs.apply(&product(&info, v)));

        let mut target = self.coherent(a, self.d_big);
        target.scale(C64::new(x0, 0.0));
        target.add_scaled(C64::new(x1, 0.0), &self.coherent(-a, self.d_big));

        OracleLeg {
            oracle: self,
            bell,
            outputs,
            target,
        }
    }
}

/// One leg's beam-splitter outputs, reused for every count pair.
pub struct OracleLeg<'a> {
    oracle: &'a FockOracle,
    bell: f64,
    /// `U(info ⊗ v(±α))`.
    outputs: [Vec<C64>; 2],
    target: FockVector,
}

impl OracleLeg<'_> {
    /// Un-normalized receiver vector heralded by `(n_sum, n_diff)`.
    pub fn residual(&self, pair: (u32, u32)) -> FockVector {
        let d = self.oracle.d;
        let (s, t) = (pair.0 as usize, pair.1 as usize);
        let mut out = FockVector::zeros(self.oracle.d_big);
        if s >= d || t >= d {
            return out;
        }
        for (k, w) in self.outputs.iter().enumerate() {
            let c = w[s * d + t] * self.bell;
            out.add_scaled(c, &self.oracle.receiver[k]);
        }
        out
    }

    pub fn probability(&self, pair: (u32, u32)) -> f64 {
        self.residual(pair).norm_sqr()
    }

    pub fn corrected(&self, pair: (u32, u32), op: CorrectionOp) -> FockVector {
        let mut v = self.residual(pair);
        if op.has_phase() {
            v = v.phase_flip();
        }
        if op.has_displacement() {
            v = apply_matrix(&self.oracle.displacement, &v);
        }
        v
    }

    /// Fidelity of the corrected receiver with the sender's state, using the
    /// same correction rule as the protocol engine.
    pub fn fidelity(&self, pair: (u32, u32)) -> f64 {
        fock_fidelity(
            &self.target,
            &self.corrected(pair, correction_for_pair(pair)),
        )
    }
}

/// Result of running one event through the oracle.
#[derive(Clone, Debug)]
pub struct OracleRun {
    pub probability: f64,
    pub fidelities: [f64; 3],
    /// Un-normalized receiver vectors for modes 4, 5, 6.
    pub residuals: [FockVector; 3],
}

pub fn oracle_run(
    params: &ProtocolParams,
    event: &DetectionEvent,
    budget: f64,
) -> Result<OracleRun> {
    let oracle = FockOracle::new(params.alpha, params.cutoff.max(max_count(event)), budget)?;
    let mut probability = 1.0;
    let mut fidelities = [0.0; 3];
    let mut residuals = Vec::with_capacity(3);
    for leg in Leg::ALL {
        let (x0, x1) = params.coefficients(leg);
        let l = oracle.leg(x0, x1);
        let pair = event.pair(leg);
        probability *= l.probability(pair);
        fidelities[leg.index()] = l.fidelity(pair);
        residuals.push(l.residual(pair));
    }
    let [a, b, c]: [FockVector; 3] = residuals.try_into().expect("three legs");
    Ok(OracleRun {
        probability,
        fidelities,
        residuals: [a, b, c],
    })
}

fn max_count(event: &DetectionEvent) -> u32 {
    event.counts.iter().copied().max().unwrap_or(0)
}

/// Largest disagreement between the coherent algebra and the oracle over
/// every enumerated event of one parameter point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub alpha: f64,
    pub theta: [f64; 3],
    pub events: usize,
    pub oracle_mass: f64,
    pub max_probability_deviation: f64,
    pub max_probability_event: DetectionEvent,
    pub max_fidelity_deviation: f64,
    pub max_fidelity_event: DetectionEvent,
    pub max_fidelity_leg: Leg,
}

impl VerifyReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_probability_deviation
            .max(self.max_fidelity_deviation)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_deviation() <= tol
    }
}

/// Compares every enumerated event of `params` against the oracle.
/// `perturb` is added to α on the algebra side only (fault injection).
pub fn verify_against_oracle(
    params: &ProtocolParams,
    perturb: f64,
    budget: f64,
) -> Result<VerifyReport> {
    let mut algebra_params = *params;
    algebra_params.alpha += perturb;
    let algebra = enumerate_outcomes(&algebra_params)?;
    let oracle = FockOracle::new(params.alpha, params.cutoff, budget)?;
    let mut tables: Vec<Vec<(f64, f64)>> = Vec::with_capacity(3);
    for leg in Leg::ALL {
        let (x0, x1) = params.coefficients(leg);
        let l = oracle.leg(x0, x1);
        tables.push(
            algebra
                .leg(leg)
                .branches
                .iter()
                .map(|b| (l.probability(b.pair), l.fidelity(b.pair)))
                .collect(),
        );
    }
    let origin = DetectionEvent::new([0; 6]);
    let mut report = VerifyReport {
        alpha: params.alpha,
        theta: params.theta,
        events: 0,
        oracle_mass: 0.0,
        max_probability_deviation: 0.0,
        max_probability_event: origin,
        max_fidelity_deviation: 0.0,
        max_fidelity_event: origin,
        max_fidelity_leg: Leg::AliceToBob,
    };
    let [l0, l1, l2] = &algebra.legs;
    for (i, x) in l0.branches.iter().enumerate() {
        for (j, y) in l1.branches.iter().enumerate() {
            for (k, z) in l2.branches.iter().enumerate() {
                let o = [tables[0][i], tables[1][j], tables[2][k]];
                let p_alg = x.probability * y.probability * z.probability;
                let p_orc = o[0].0 * o[1].0 * o[2].0;
                let event = DetectionEvent::from_pairs([x.pair, y.pair, z.pair]);
                report.events += 1;
                report.oracle_mass += p_orc;
                let dp = (p_alg - p_orc).abs();
                if dp > report.max_probability_deviation || dp.is_nan() {
                    report.max_probability_deviation = if dp.is_nan() { f64::INFINITY } else { dp };
                    report.max_probability_event = event;
                }
                for (leg, (b, ob)) in Leg::ALL.iter().zip([x, y, z].iter().zip(o)) {
                    let df = (b.fidelity - ob.1).abs();
                    if df > report.max_fidelity_deviation || df.is_nan() {
                        report.max_fidelity_deviation =
                            if df.is_nan() { f64::INFINITY } else { df };
                        report.max_fidelity_event = event;
                        report.max_fidelity_leg = *leg;
                    }
                }
            }
        }
    }
    Ok(report)
}

/// `count` θ-triples drawn uniformly from [0, π) with a fixed seed.
pub fn seeded_theta_triples(seed: u64, count: usize) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| [0; 3].map(|_| rng.random_range(0.0..PI)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent::{coherent_overlap, fock_amplitude};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn coherent_vector_examples() {
        let v = coherent_to_fock(c(0.0, 0.0), 5, 1e-12).unwrap();
        assert_eq!(v.coeffs[0], c(1.0, 0.0));
        assert!(v.coeffs[1..].iter().all(|x| x.norm() == 0.0));
        let v = coherent_to_fock(c(1.0, 0.0), 40, 1e-12).unwrap();
        assert!((v.norm_sqr() - 1.0).abs() < 1e-12);
        let v = coherent_to_fock(c(2f64.sqrt(), 0.0), 30, 1e-12).unwrap();
        assert!((v.coeffs[2] / v.coeffs[0] - c(2f64.sqrt(), 0.0)).norm() < 1e-14);
        for n in 0..30 {
            assert!((v.coeffs[n] - fock_amplitude(c(2f64.sqrt(), 0.0), n as u32)).norm() < 1e-14);
        }
    }

    #[test]
    fn tail_budget_error_suggests_dimension() {
        match coherent_to_fock(c(3.0, 0.0), 10, 1e-12) {
            Err(Error::TailBudget { suggested, .. }) => {
                assert!(suggested > 10);
                assert!(coherent_to_fock(c(3.0, 0.0), suggested, 1e-12).is_ok());
            }
            other => panic!("expected tail error, got {other:?}"),
        }
        assert!(poisson_tail(9.0, trunc_dim(3.0)) < 1e-12);
    }

    #[test]
    fn overlap_identity() {
        let b = c(0.7, -0.4);
        let e = c(-1.1, 0.3);
        let d = trunc_dim(1.2);
        let x = coherent_to_fock(b, d, 1e-12).unwrap();
        let y = coherent_to_fock(e, d, 1e-12).unwrap();
        assert!((x.inner(&y) - coherent_overlap(b, e)).norm() < 1e-12);
    }

    #[test]
    fn unitary_small_dense() {
        let bs = BsUnitary::new(6);
        let u = bs.to_dense();
        let id = u.adjoint() * &u;
        for r in 0..36 {
            for k in 0..36 {
                let e = if r == k { 1.0 } else { 0.0 };
                assert!((id[(r, k)] - c(e, 0.0)).norm() < 1e-10);
            }
        }
        let mut vac = vec![c(0.0, 0.0); 36];
        vac[0] = c(1.0, 0.0);
        let out = bs.apply(&vac);
        assert!((out[0] - c(1.0, 0.0)).norm() < 1e-12);
        // a single photon in u splits evenly: |1,0⟩ → (|1,0⟩ + |0,1⟩)/√2
        let mut one = vec![c(0.0, 0.0); 36];
        one[6] = c(1.0, 0.0);
        let out = bs.apply(&one);
        assert!((out[6] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-12);
        assert!((out[1] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn unitary_maps_coherent_pairs() {
        let d = trunc_dim(2.0);
        let bs = BsUnitary::new(d);
        let x = coherent_to_fock(c(1.0, 0.0), d, 1e-12).unwrap();
        let out = bs.apply(&product(&x, &x));
        let want = product(
            &coherent_to_fock(c(2f64.sqrt(), 0.0), d, 1e-12).unwrap(),
            &coherent_to_fock(c(0.0, 0.0), d, 1e-12).unwrap(),
        );
        let ov: C64 = want.iter().zip(&out).map(|(a, b)| a.conj() * b).sum();
        assert!(1.0 - ov.norm_sqr() < 1e-8);
        let back = bs.apply_adjoint(&out);
        let orig = product(&x, &x);
        for (a, b) in back.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn unitary_conserves_photon_number() {
        let d = trunc_dim(2.0);
        let bs = BsUnitary::new(d);
        let x = coherent_to_fock(c(0.8, 0.3), d, 1e-12).unwrap();
        let y = coherent_to_fock(c(-0.5, 0.9), d, 1e-12).unwrap();
        let number = |v: &[C64]| -> f64 {
            v.iter()
                .enumerate()
                .map(|(i, a)| ((i / d) + (i % d)) as f64 * a.norm_sqr())
                .sum()
        };
        let v = product(&x, &y);
        assert!((number(&v) - number(&bs.apply(&v))).abs() < 1e-10);
    }

    #[test]
    fn displacement_shifts_coherent_state() {
        let dim = 80;
        let delta = c(0.0, 1.3);
        let m = displacement_matrix(delta, dim);
        let beta = c(0.9, 0.0);
        let v = coherent_to_fock(beta, dim, 1e-12).unwrap();
        let out = apply_matrix(&m, &v);
        let want = coherent_to_fock(beta + delta, dim, 1e-12).unwrap();
        let phase = ((delta * beta.conj() - delta.conj() * beta) / 2.0).exp();
        for n in 0..30 {
            assert!((out.coeffs[n] - phase * want.coeffs[n]).norm() < 1e-10);
        }
    }

    #[test]
    fn oracle_impossible_event_is_zero() {
        let params = ProtocolParams::new(1.0, [0.3, 0.5, 0.7]).unwrap();
        let run = oracle_run(&params, &DetectionEvent::new([1, 1, 2, 0, 0, 3]), 1e-12).unwrap();
        assert!(run.probability < 1e-20);
    }

    #[test]
    fn oracle_matches_algebra_small_alpha() {
        let params = ProtocolParams::new(0.7, [0.3, 1.2, 2.5]).unwrap();
        let r = verify_against_oracle(&params, 0.0, 1e-12).unwrap();
        assert!(r.passes(1e-6), "{r:?}");
        assert!((r.oracle_mass - 1.0).abs() < 1e-9);
        let bad = verify_against_oracle(&params, 1e-3, 1e-12).unwrap();
        assert!(!bad.passes(1e-6));
    }

    #[test]
    fn seeded_thetas_are_reproducible() {
        assert_eq!(seeded_theta_triples(5, 3), seeded_theta_triples(5, 3));
        assert_ne!(seeded_theta_triples(5, 3), seeded_theta_triples(6, 3));
    }
}
