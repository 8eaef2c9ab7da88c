//! Finite superpositions of multimode coherent states.
//!
//! A [`SuperposedState`] is a weighted sum of products of single-mode coherent
//! states `|β₁⟩⊗|β₂⟩⊗…`. Every linear-optical element used by the protocol
//! (beam splitters, phase shifters, displacements) maps such a sum to another
//! such sum, and a photon-number projection on one mode only rescales the
//! weights. Norms are never assumed: the terms are not orthogonal, so every
//! norm goes through the Gram matrix of pairwise overlaps.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Amplitudes closer than this (per real/imaginary component) are the same ket.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Squared norms below this mark an impossible branch.
pub const ZERO_NORM_THRESHOLD: f64 = 1e-14;

const NORMALIZED_TOLERANCE: f64 = 1e-12;

/// Name of one optical mode: a letter for information modes (`a`, `b`, `c`)
/// or a number for channel, detector and receiver ports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeLabel {
    Name(char),
    Port(u8),
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::Name(c) => write!(f, "{c}"),
            ModeLabel::Port(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for ModeLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if let Ok(n) = s.parse::<u8>() {
            return Ok(ModeLabel::Port(n));
        }
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if c.is_alphabetic() => Ok(ModeLabel::Name(c)),
            _ => Err(format!("invalid mode label {s:?}")),
        }
    }
}

impl Serialize for ModeLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModeLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<u8> for ModeLabel {
    fn from(n: u8) -> Self {
        ModeLabel::Port(n)
    }
}

impl From<char> for ModeLabel {
    fn from(c: char) -> Self {
        ModeLabel::Name(c)
    }
}

/// ⟨β|δ⟩ = exp[−(|β|² + |δ|² − 2β*δ)/2].
pub fn coherent_overlap(beta: C64, delta: C64) -> C64 {
    (-(beta.norm_sqr() + delta.norm_sqr() - 2.0 * beta.conj() * delta) / 2.0).exp()
}

/// Fock amplitude ⟨n|β⟩ = e^{−|β|²/2} βⁿ/√(n!).
pub fn fock_amplitude(beta: C64, n: u32) -> C64 {
    if n == 0 {
        return C64::new((-beta.norm_sqr() / 2.0).exp(), 0.0);
    }
    if beta == C64::new(0.0, 0.0) {
        return C64::new(0.0, 0.0);
    }
    // log-space magnitude avoids overflow of βⁿ and n! separately
    let ln_mag = -beta.norm_sqr() / 2.0 + n as f64 * beta.norm().ln() - 0.5 * ln_factorial(n);
    C64::from_polar(ln_mag.exp(), n as f64 * beta.arg())
}

pub(crate) fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Precomputed ⟨n|β⟩ for a handful of amplitudes and all n ≤ `max_n`.
///
/// Detector modes after the beam splitters only ever carry `0` or `±√2·α`,
/// so enumerating tens of thousands of events reuses one small table.
#[derive(Clone, Debug)]
pub struct FockKernelCache {
    amplitudes: Vec<C64>,
    table: Vec<Vec<C64>>,
}

impl FockKernelCache {
    pub fn new(amplitudes: &[C64], max_n: u32) -> Self {
        let mut distinct: Vec<C64> = Vec::new();
        for &b in amplitudes {
            if !distinct.iter().any(|&d| same_amplitude(d, b)) {
                distinct.push(b);
            }
        }
        let table = distinct
            .iter()
            .map(|&b| (0..=max_n).map(|n| fock_amplitude(b, n)).collect())
            .collect();
        FockKernelCache {
            amplitudes: distinct,
            table,
        }
    }

    pub fn amplitude(&self, beta: C64, n: u32) -> C64 {
        for (i, &b) in self.amplitudes.iter().enumerate() {
            if same_amplitude(b, beta) {
                if let Some(&v) = self.table[i].get(n as usize) {
                    return v;
                }
                break;
            }
        }
        fock_amplitude(beta, n)
    }
}

fn same_amplitude(x: C64, y: C64) -> bool {
    (x.re - y.re).abs() <= MERGE_TOLERANCE && (x.im - y.im).abs() <= MERGE_TOLERANCE
}

fn check_finite(v: C64, what: &'static str) -> Result<()> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// One weighted product of coherent states, amplitudes listed in the owning
/// state's mode order.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentTerm {
    pub weight: C64,
    pub amplitudes: Vec<C64>,
}

impl CoherentTerm {
    pub fn new(weight: C64, amplitudes: Vec<C64>) -> Self {
        CoherentTerm { weight, amplitudes }
    }
}

/// Borrowed view of one term.
#[derive(Clone, Copy, Debug)]
pub struct TermRef<'a> {
    pub weight: C64,
    pub amplitudes: &'a [C64],
}

/// Weighted sum of multimode coherent states over a fixed, ordered mode set.
///
/// Terms are stored flat (`amps[t * modes + k]`) so that the hot enumeration
/// path does not allocate per term.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperposedState {
    modes: Vec<ModeLabel>,
    weights: Vec<C64>,
    amps: Vec<C64>,
    normalized: bool,
}

impl SuperposedState {
    pub fn new(modes: Vec<ModeLabel>, terms: Vec<CoherentTerm>) -> Result<Self> {
        check_unique(&modes)?;
        let mut weights = Vec::with_capacity(terms.len());
        let mut amps = Vec::with_capacity(terms.len() * modes.len());
        for term in terms {
            if term.amplitudes.len() != modes.len() {
                return Err(Error::TermShape {
                    expected: modes.len(),
                    got: term.amplitudes.len(),
                });
            }
            check_finite(term.weight, "term weight")?;
            for &b in &term.amplitudes {
                check_finite(b, "coherent amplitude")?;
            }
            weights.push(term.weight);
            amps.extend_from_slice(&term.amplitudes);
        }
        Ok(SuperposedState {
            modes,
            weights,
            amps,
            normalized: false,
        })
    }

    /// Single-mode coherent state |β⟩.
    pub fn coherent(mode: impl Into<ModeLabel>, beta: C64) -> Self {
        SuperposedState {
            modes: vec![mode.into()],
            weights: vec![C64::new(1.0, 0.0)],
            amps: vec![beta],
            normalized: true,
        }
    }

    pub fn vacuum(mode: impl Into<ModeLabel>) -> Self {
        Self::coherent(mode, C64::new(0.0, 0.0))
    }

    /// Un-normalized `c0|α⟩ + c1|−α⟩` on one mode.
    pub fn cat(mode: impl Into<ModeLabel>, c0: C64, c1: C64, alpha: C64) -> Self {
        SuperposedState {
            modes: vec![mode.into()],
            weights: vec![c0, c1],
            amps: vec![alpha, -alpha],
            normalized: false,
        }
    }

    /// The empty sum over `modes`; the result of projecting onto an
    /// impossible outcome.
    pub fn zero(modes: Vec<ModeLabel>) -> Self {
        SuperposedState {
            modes,
            weights: Vec::new(),
            amps: Vec::new(),
            normalized: false,
        }
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.modes
    }

    pub fn num_terms(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    pub fn term(&self, t: usize) -> TermRef<'_> {
        let m = self.modes.len();
        TermRef {
            weight: self.weights[t],
            amplitudes: &self.amps[t * m..(t + 1) * m],
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = TermRef<'_>> + '_ {
        (0..self.num_terms()).map(move |t| self.term(t))
    }

    pub fn to_terms(&self) -> Vec<CoherentTerm> {
        self.terms()
            .map(|t| CoherentTerm::new(t.weight, t.amplitudes.to_vec()))
            .collect()
    }

    pub fn mode_index(&self, mode: ModeLabel) -> Result<usize> {
        self.modes
            .iter()
            .position(|&m| m == mode)
            .ok_or(Error::MissingMode(mode))
    }

    fn same_mode_set(&self, other: &Self) -> Result<()> {
        if self.modes == other.modes {
            Ok(())
        } else {
            Err(Error::ModeSetMismatch {
                lhs: self.modes.clone(),
                rhs: other.modes.clone(),
            })
        }
    }

    /// ⟨self|other⟩, summed over term pairs.
    ///
    /// Per-mode overlaps are tabulated over the distinct amplitudes first, so
    /// states built from a few amplitude values cost a handful of `exp` calls.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.same_mode_set(other)?;
        let m = self.modes.len();
        let (nl, nr) = (self.num_terms(), other.num_terms());
        if nl == 0 || nr == 0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let mut per_mode: Vec<(Vec<usize>, Vec<usize>, Vec<C64>, usize)> = Vec::with_capacity(m);
        for k in 0..m {
            let (ld, lidx) = distinct_column(&self.amps, m, k);
            let (rd, ridx) = distinct_column(&other.amps, m, k);
            let mut table = Vec::with_capacity(ld.len() * rd.len());
            for &l in &ld {
                for &r in &rd {
                    table.push(coherent_overlap(l, r));
                }
            }
            per_mode.push((lidx, ridx, table, rd.len()));
        }
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..nl {
            let wi = self.weights[i].conj();
            for j in 0..nr {
                let mut prod = wi * other.weights[j];
                for (lidx, ridx, table, stride) in &per_mode {
                    prod *= table[lidx[i] * stride + ridx[j]];
                }
                acc += prod;
            }
        }
        Ok(acc)
    }

    pub fn norm_sqr(&self) -> f64 {
        // same mode set by construction
        self.inner(self).map(|v| v.re).unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().max(0.0).sqrt()
    }

    /// Matrix of pairwise term overlaps, including the weights:
    /// `G[i][j] = w_i* w_j ⟨terms_i|terms_j⟩`.
    pub fn gram_matrix(&self) -> DMatrix<C64> {
        let n = self.num_terms();
        DMatrix::from_fn(n, n, |i, j| {
            let ti = self.term(i);
            let tj = self.term(j);
            let ov: C64 = ti
                .amplitudes
                .iter()
                .zip(tj.amplitudes)
                .map(|(&b, &d)| coherent_overlap(b, d))
                .product();
            ti.weight.conj() * tj.weight * ov
        })
    }

    /// Returns `self / ‖self‖`.
    pub fn normalize(&self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if !(n2 > ZERO_NORM_THRESHOLD) {
            return Err(Error::ZeroNorm(n2));
        }
        let mut out = self.scaled(C64::new(1.0 / n2.sqrt(), 0.0));
        out.normalized = true;
        debug_assert!((out.norm() - 1.0).abs() < NORMALIZED_TOLERANCE);
        Ok(out)
    }

    /// Normalizes after rescaling the largest weight to one, so that branches
    /// with very small (but nonzero) amplitude still normalize cleanly.
    pub fn normalize_relative(&self) -> Result<Self> {
        let max = self.weights.iter().map(|w| w.norm()).fold(0.0, f64::max);
        if max == 0.0 || !max.is_finite() {
            return Err(Error::ZeroNorm(0.0));
        }
        self.scaled(C64::new(1.0 / max, 0.0)).normalize()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        SuperposedState {
            modes: self.modes.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
            amps: self.amps.clone(),
            normalized: self.normalized && (factor.norm() - 1.0).abs() < NORMALIZED_TOLERANCE,
        }
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        for m in &other.modes {
            if self.modes.contains(m) {
                return Err(Error::DuplicateMode(*m));
            }
        }
        let (ml, mr) = (self.modes.len(), other.modes.len());
        let mut modes = self.modes.clone();
        modes.extend_from_slice(&other.modes);
        let n = self.num_terms() * other.num_terms();
        let mut weights = Vec::with_capacity(n);
        let mut amps = Vec::with_capacity(n * (ml + mr));
        for i in 0..self.num_terms() {
            for j in 0..other.num_terms() {
                weights.push(self.weights[i] * other.weights[j]);
                amps.extend_from_slice(&self.amps[i * ml..(i + 1) * ml]);
                amps.extend_from_slice(&other.amps[j * mr..(j + 1) * mr]);
            }
        }
        Ok(SuperposedState {
            modes,
            weights,
            amps,
            normalized: self.normalized && other.normalized,
        })
    }

    /// Symmetric beam splitter with built-in phase shifters:
    /// `(β_u, β_v) ↦ (β_i, β_j) = ((β_u+β_v)/√2, (β_u−β_v)/√2)`.
    ///
    /// The outputs replace `u` and `v` in place; `i`/`j` may reuse those labels
    /// or be fresh, but may not name any other mode of the state.
    pub fn apply_bps(
        &self,
        u: ModeLabel,
        v: ModeLabel,
        i: ModeLabel,
        j: ModeLabel,
    ) -> Result<Self> {
        let iu = self.mode_index(u)?;
        let iv = self.mode_index(v)?;
        if iu == iv {
            return Err(Error::DuplicateMode(u));
        }
        if i == j {
            return Err(Error::LabelCollision(j));
        }
        for out in [i, j] {
            if out != u && out != v && self.modes.contains(&out) {
                return Err(Error::LabelCollision(out));
            }
        }
        let m = self.modes.len();
        let mut next = self.clone();
        next.modes[iu] = i;
        next.modes[iv] = j;
        for t in 0..self.num_terms() {
            let bu = self.amps[t * m + iu];
            let bv = self.amps[t * m + iv];
            next.amps[t * m + iu] = (bu + bv) * FRAC_1_SQRT_2;
            next.amps[t * m + iv] = (bu - bv) * FRAC_1_SQRT_2;
        }
        Ok(next)
    }

    /// Phase shifter `exp(−iθ a†a)`: `β ↦ e^{−iθ}β` on `mode`.
    pub fn phase_shift(&self, mode: ModeLabel, theta: f64) -> Result<Self> {
        let k = self.mode_index(mode)?;
        let m = self.modes.len();
        let rot = C64::from_polar(1.0, -theta);
        let mut next = self.clone();
        for t in 0..self.num_terms() {
            next.amps[t * m + k] *= rot;
        }
        Ok(next)
    }

    /// Displacement `D(δ)`: `|β⟩ ↦ exp[½(δβ* − δ*β)] |β+δ⟩` on `mode`.
    pub fn displace(&self, mode: ModeLabel, delta: C64) -> Result<Self> {
        check_finite(delta, "displacement")?;
        let k = self.mode_index(mode)?;
        let m = self.modes.len();
        let mut next = self.clone();
        for t in 0..self.num_terms() {
            let beta = self.amps[t * m + k];
            let phase = ((delta * beta.conj() - delta.conj() * beta) / 2.0).exp();
            next.weights[t] *= phase;
            next.amps[t * m + k] = beta + delta;
        }
        Ok(next)
    }

    /// Contracts `mode` with the Fock state ⟨n|; the mode is removed and the
    /// result is left un-normalized. Terms whose kernel is exactly zero are
    /// dropped.
    pub fn project_fock(&self, mode: ModeLabel, n: u32) -> Result<Self> {
        self.project_fock_many(&[(mode, n)], None)
    }

    /// Several [`project_fock`](Self::project_fock) calls fused into one pass.
    pub fn project_fock_many(
        &self,
        counts: &[(ModeLabel, u32)],
        cache: Option<&FockKernelCache>,
    ) -> Result<Self> {
        let m = self.modes.len();
        let mut idx = Vec::with_capacity(counts.len());
        for &(mode, _) in counts {
            let k = self.mode_index(mode)?;
            if idx.contains(&k) {
                return Err(Error::DuplicateMode(mode));
            }
            idx.push(k);
        }
        let keep: Vec<usize> = (0..m).filter(|k| !idx.contains(k)).collect();
        let modes: Vec<ModeLabel> = keep.iter().map(|&k| self.modes[k]).collect();
        let mut weights = Vec::with_capacity(self.num_terms());
        let mut amps = Vec::with_capacity(self.num_terms() * keep.len());
        'terms: for t in 0..self.num_terms() {
            let row = &self.amps[t * m..(t + 1) * m];
            let mut w = self.weights[t];
            for (&k, &(_, n)) in idx.iter().zip(counts) {
                let kern = match cache {
                    Some(c) => c.amplitude(row[k], n),
                    None => fock_amplitude(row[k], n),
                };
                if kern == C64::new(0.0, 0.0) {
                    continue 'terms;
                }
                w *= kern;
            }
            weights.push(w);
            amps.extend(keep.iter().map(|&k| row[k]));
        }
        Ok(SuperposedState {
            modes,
            weights,
            amps,
            normalized: false,
        })
    }

    /// Merges terms with matching amplitudes (within [`MERGE_TOLERANCE`]),
    /// then drops terms whose `|w|·exp(max_k |β_k|²/2)` falls below `tol`.
    pub fn prune(&self, tol: f64) -> Self {
        let m = self.modes.len();
        let mut weights: Vec<C64> = Vec::with_capacity(self.num_terms());
        let mut amps: Vec<C64> = Vec::with_capacity(self.amps.len());
        for t in 0..self.num_terms() {
            let row = &self.amps[t * m..(t + 1) * m];
            let hit = (0..weights.len()).find(|&s| {
                amps[s * m..(s + 1) * m]
                    .iter()
                    .zip(row)
                    .all(|(&x, &y)| same_amplitude(x, y))
            });
            match hit {
                Some(s) => weights[s] += self.weights[t],
                None => {
                    weights.push(self.weights[t]);
                    amps.extend_from_slice(row);
                }
            }
        }
        let mut out = SuperposedState::zero(self.modes.clone());
        for (s, w) in weights.iter().enumerate() {
            let row = &amps[s * m..(s + 1) * m];
            let bound = row.iter().map(|b| b.norm_sqr()).fold(0.0, f64::max) / 2.0;
            if w.norm() * bound.exp() >= tol && *w != C64::new(0.0, 0.0) {
                out.weights.push(*w);
                out.amps.extend_from_slice(row);
            }
        }
        out
    }

    /// Restricts the state to a subset of modes. Only meaningful when the
    /// dropped modes carry the same amplitude in every term (e.g. vacuum).
    pub(crate) fn with_modes_permuted(&self, order: &[ModeLabel]) -> Result<Self> {
        if order.len() != self.modes.len() {
            return Err(Error::ModeSetMismatch {
                lhs: self.modes.clone(),
                rhs: order.to_vec(),
            });
        }
        let idx: Vec<usize> = order
            .iter()
            .map(|&mode| self.mode_index(mode))
            .collect::<Result<_>>()?;
        let m = self.modes.len();
        let mut amps = Vec::with_capacity(self.amps.len());
        for t in 0..self.num_terms() {
            amps.extend(idx.iter().map(|&k| self.amps[t * m + k]));
        }
        Ok(SuperposedState {
            modes: order.to_vec(),
            weights: self.weights.clone(),
            amps,
            normalized: self.normalized,
        })
    }

    /// Coefficient tensor over the distinct amplitudes of each mode. Since
    /// coherent states with distinct amplitudes are linearly independent, the
    /// tensor determines the state uniquely.
    fn coefficient_grid(&self) -> CoefficientGrid {
        let m = self.modes.len();
        let mut values = Vec::with_capacity(m);
        let mut index = Vec::with_capacity(m);
        for k in 0..m {
            let (vals, idx) = distinct_column_tol(&self.amps, m, k);
            values.push(vals);
            index.push(idx);
        }
        let shape: Vec<usize> = values.iter().map(Vec::len).collect();
        let size = shape.iter().product::<usize>().max(1);
        let mut coeffs = vec![C64::new(0.0, 0.0); size];
        for t in 0..self.num_terms() {
            let mut flat = 0;
            for k in 0..m {
                flat = flat * shape[k] + index[k][t];
            }
            coeffs[flat] += self.weights[t];
        }
        CoefficientGrid {
            values,
            shape,
            coeffs,
        }
    }

    /// Splits a product state into single-mode factors (in mode order). The
    /// product of the factors equals `self` up to rounding; the scale is
    /// carried by the first factor.
    pub fn factorize(&self, tol: f64) -> Result<Vec<SuperposedState>> {
        let grid = self.coefficient_grid();
        let m = self.modes.len();
        let (pivot, pmax) = grid
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax == 0.0 {
            return Err(Error::ZeroNorm(0.0));
        }
        let pivot_idx = grid.unflatten(pivot);
        let pivot_val = grid.coeffs[pivot];
        let mut factors: Vec<Vec<C64>> = Vec::with_capacity(m);
        for k in 0..m {
            let mut idx = pivot_idx.clone();
            let f: Vec<C64> = (0..grid.shape[k])
                .map(|v| {
                    idx[k] = v;
                    grid.coeffs[grid.flatten(&idx)] / pivot_val
                })
                .collect();
            factors.push(f);
        }
        for (flat, &c) in grid.coeffs.iter().enumerate() {
            let idx = grid.unflatten(flat);
            let mut r = pivot_val;
            for k in 0..m {
                r *= factors[k][idx[k]];
            }
            if (c - r).norm() > tol * pmax {
                return Err(Error::NotFactorizable);
            }
        }
        let mut out = Vec::with_capacity(m);
        for k in 0..m {
            let scale = if k == 0 {
                pivot_val
            } else {
                C64::new(1.0, 0.0)
            };
            let mut weights = Vec::new();
            let mut amps = Vec::new();
            for (v, &f) in factors[k].iter().enumerate() {
                if f != C64::new(0.0, 0.0) {
                    weights.push(f * scale);
                    amps.push(grid.values[k][v]);
                }
            }
            out.push(SuperposedState {
                modes: vec![self.modes[k]],
                weights,
                amps,
                normalized: false,
            });
        }
        Ok(out)
    }

    /// Whether the coefficient matrix across the cut after the first `split`
    /// modes has rank one (Schmidt rank one), judged on all 2×2 minors
    /// relative to the largest coefficient.
    pub fn schmidt_rank_one(&self, split: usize, tol: f64) -> bool {
        let grid = self.coefficient_grid();
        let rows: usize = grid.shape[..split].iter().product();
        let cols: usize = grid.shape[split..].iter().product();
        let at = |r: usize, c: usize| grid.coeffs[r * cols + c];
        let max = grid.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return true;
        }
        for r1 in 0..rows {
            for r2 in r1 + 1..rows {
                for c1 in 0..cols {
                    for c2 in c1 + 1..cols {
                        let minor = at(r1, c1) * at(r2, c2) - at(r1, c2) * at(r2, c1);
                        if minor.norm() > tol * max * max {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

struct CoefficientGrid {
    values: Vec<Vec<C64>>,
    shape: Vec<usize>,
    coeffs: Vec<C64>,
}

impl CoefficientGrid {
    fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &s)| acc * s + i)
    }

    fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for k in (0..self.shape.len()).rev() {
            idx[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
        idx
    }
}

fn check_unique(modes: &[ModeLabel]) -> Result<()> {
    for (i, m) in modes.iter().enumerate() {
        if modes[..i].contains(m) {
            return Err(Error::DuplicateMode(*m));
        }
    }
    Ok(())
}

/// Distinct values (exact) in column `k` of a flat `t × m` table.
fn distinct_column(amps: &[C64], m: usize, k: usize) -> (Vec<C64>, Vec<usize>) {
    let mut vals: Vec<C64> = Vec::new();
    let mut idx = Vec::with_capacity(amps.len() / m.max(1));
    for row in amps.chunks_exact(m) {
        let b = row[k];
        let i = match vals.iter().position(|&v| v == b) {
            Some(i) => i,
            None => {
                vals.push(b);
                vals.len() - 1
            }
        };
        idx.push(i);
    }
    (vals, idx)
}

/// Like [`distinct_column`] but merging amplitudes within [`MERGE_TOLERANCE`].
fn distinct_column_tol(amps: &[C64], m: usize, k: usize) -> (Vec<C64>, Vec<usize>) {
    let mut vals: Vec<C64> = Vec::new();
    let mut idx = Vec::with_capacity(amps.len() / m.max(1));
    for row in amps.chunks_exact(m) {
        let b = row[k];
        let i = match vals.iter().position(|&v| same_amplitude(v, b)) {
            Some(i) => i,
            None => {
                vals.push(b);
                vals.len() - 1
            }
        };
        idx.push(i);
    }
    (vals, idx)
}

/// |⟨x|y⟩|² / (⟨x|x⟩⟨y|y⟩); insensitive to scale and global phase.
pub fn fidelity(x: &SuperposedState, y: &SuperposedState) -> Result<f64> {
    let xy = x.inner(y)?;
    let xx = x.norm_sqr();
    let yy = y.norm_sqr();
    if !(xx > 0.0 && yy > 0.0) {
        return Err(Error::ZeroNorm(xx.min(yy)));
    }
    Ok((xy.norm_sqr() / (xx * yy)).clamp(0.0, 1.0))
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    modes: Vec<ModeLabel>,
    terms: Vec<TermJson>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    w: [f64; 2],
    beta: Vec<[f64; 2]>,
}

impl Serialize for SuperposedState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateJson {
            modes: self.modes.clone(),
            terms: self
                .terms()
                .map(|t| TermJson {
                    w: [t.weight.re, t.weight.im],
                    beta: t.amplitudes.iter().map(|b| [b.re, b.im]).collect(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SuperposedState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = StateJson::deserialize(d)?;
        let terms = raw
            .terms
            .into_iter()
            .map(|t| {
                CoherentTerm::new(
                    C64::new(t.w[0], t.w[1]),
                    t.beta.into_iter().map(|b| C64::new(b[0], b[1])).collect(),
                )
            })
            .collect();
        SuperposedState::new(raw.modes, terms).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Σ_n ⟨β|n⟩⟨n|δ⟩ truncated at `n_max`; independent of `coherent_overlap`.
    fn fock_series_overlap(beta: C64, delta: C64, n_max: u32) -> C64 {
        let mut kb = c((-beta.norm_sqr() / 2.0).exp(), 0.0);
        let mut kd = c((-delta.norm_sqr() / 2.0).exp(), 0.0);
        let mut acc = kb.conj() * kd;
        for n in 1..=n_max {
            let s = (n as f64).sqrt();
            kb = kb * beta / s;
            kd = kd * delta / s;
            acc += kb.conj() * kd;
        }
        acc
    }

    #[test]
    fn overlap_examples() {
        let a = c(0.8, -0.3);
        assert!((coherent_overlap(a, a) - c(1.0, 0.0)).norm() < 1e-15);
        let v = coherent_overlap(c(1.0, 0.0), c(-1.0, 0.0));
        assert!((v.re - 0.1353352832366127).abs() < 1e-15 && v.im.abs() < 1e-15);
        let beta = c(1.0, 1.0);
        let delta = c(2.0, 0.0);
        let series = fock_series_overlap(beta, delta, 60);
        assert!((coherent_overlap(beta, delta) - series).norm() < 1e-13);
    }

    #[test]
    fn fock_kernel_values() {
        assert_eq!(fock_amplitude(c(0.0, 0.0), 0), c(1.0, 0.0));
        assert_eq!(fock_amplitude(c(0.0, 0.0), 3), c(0.0, 0.0));
        // n = 2 on β = √2: e^{-1}·2/√2 = √2·e^{-1}
        let k = fock_amplitude(c(SQRT_2, 0.0), 2);
        assert!((k.re - SQRT_2 * (-1.0f64).exp()).abs() < 1e-15);
        let neg = fock_amplitude(c(-SQRT_2, 0.0), 3);
        let pos = fock_amplitude(c(SQRT_2, 0.0), 3);
        assert!((neg + pos).norm() < 1e-15);
    }

    #[test]
    fn cat_norms() {
        let one = c(1.0, 0.0);
        let even = SuperposedState::cat('a', one, one, c(1.0, 0.0));
        let expected = 2.0 * (1.0 + (-2.0f64).exp());
        assert!((even.norm_sqr() - expected).abs() < 1e-14);
        let odd = SuperposedState::cat('a', one, -one, c(1.0, 0.0));
        for alpha in [0.1, 0.5, 1.0, 2.3] {
            let e = SuperposedState::cat('a', one, one, c(alpha, 0.0));
            let o = SuperposedState::cat('a', one, -one, c(alpha, 0.0));
            assert!(e.inner(&o).unwrap().norm() < 1e-14);
        }
        let n = even.normalize().unwrap();
        let w = 1.0 / expected.sqrt();
        assert!((n.weights()[0].re - w).abs() < 1e-14);
        assert!(n.is_normalized());
        assert!(odd.normalize().is_ok());
        assert!(matches!(
            SuperposedState::zero(vec!['a'.into()]).normalize(),
            Err(Error::ZeroNorm(_))
        ));
    }

    #[test]
    fn inner_mode_mismatch() {
        let x = SuperposedState::vacuum('a');
        let y = SuperposedState::vacuum('b');
        assert!(matches!(x.inner(&y), Err(Error::ModeSetMismatch { .. })));
    }

    #[test]
    fn tensor_rules() {
        let x = SuperposedState::coherent('a', c(0.3, 0.0)).scaled(c(2.0, 0.0));
        let y = SuperposedState::coherent('b', c(-0.3, 0.1)).scaled(c(0.0, 3.0));
        let xy = x.tensor(&y).unwrap();
        assert_eq!(xy.num_terms(), 1);
        assert_eq!(xy.weights()[0], c(0.0, 6.0));
        assert!((xy.norm_sqr() - x.norm_sqr() * y.norm_sqr()).abs() < 1e-12);
        assert!(matches!(x.tensor(&x), Err(Error::DuplicateMode(_))));
    }

    #[test]
    fn bps_examples() {
        let alpha = c(0.9, 0.0);
        let s = SuperposedState::coherent('u', alpha)
            .tensor(&SuperposedState::coherent('v', alpha))
            .unwrap();
        let out = s
            .apply_bps('u'.into(), 'v'.into(), 'i'.into(), 'j'.into())
            .unwrap();
        let t = out.term(0);
        assert!((t.amplitudes[0] - alpha * SQRT_2).norm() < 1e-15);
        assert!(t.amplitudes[1].norm() < 1e-15);

        let s = SuperposedState::coherent('u', alpha)
            .tensor(&SuperposedState::vacuum('v'))
            .unwrap();
        let out = s
            .apply_bps('u'.into(), 'v'.into(), 'u'.into(), 'v'.into())
            .unwrap();
        let t = out.term(0);
        assert!((t.amplitudes[0] - alpha / SQRT_2).norm() < 1e-15);
        assert!((t.amplitudes[1] - alpha / SQRT_2).norm() < 1e-15);
        let back = out
            .apply_bps('u'.into(), 'v'.into(), 'u'.into(), 'v'.into())
            .unwrap();
        assert!((back.term(0).amplitudes[0] - alpha).norm() < 1e-15);
        assert!(back.term(0).amplitudes[1].norm() < 1e-15);
    }

    #[test]
    fn bps_errors() {
        let s = SuperposedState::vacuum('u')
            .tensor(&SuperposedState::vacuum('v'))
            .unwrap()
            .tensor(&SuperposedState::vacuum('w'))
            .unwrap();
        assert!(matches!(
            s.apply_bps('u'.into(), 'x'.into(), 'u'.into(), 'v'.into()),
            Err(Error::MissingMode(_))
        ));
        assert!(matches!(
            s.apply_bps('u'.into(), 'v'.into(), 'w'.into(), 'v'.into()),
            Err(Error::LabelCollision(_))
        ));
    }

    #[test]
    fn phase_shift_examples() {
        let alpha = c(1.3, 0.2);
        let s = SuperposedState::coherent('a', alpha);
        assert_eq!(
            s.phase_shift('a'.into(), 0.0).unwrap().term(0).amplitudes[0],
            alpha
        );
        let flipped = s.phase_shift('a'.into(), PI).unwrap();
        assert!((flipped.term(0).amplitudes[0] + alpha).norm() < 1e-15);
        let twice = flipped.phase_shift('a'.into(), PI).unwrap();
        assert!((twice.term(0).amplitudes[0] - alpha).norm() < 1e-15);
        assert!(s.phase_shift('z'.into(), PI).is_err());
    }

    #[test]
    fn displacement_group_property() {
        let s = SuperposedState::cat('a', c(0.6, 0.0), c(0.8, 0.0), c(1.0, 0.0));
        let delta = c(0.3, -0.7);
        let id = s.displace('a'.into(), c(0.0, 0.0)).unwrap();
        assert_eq!(id, s);
        let round = s
            .displace('a'.into(), delta)
            .unwrap()
            .displace('a'.into(), -delta)
            .unwrap();
        for (t, r) in s.terms().zip(round.terms()) {
            assert!((t.amplitudes[0] - r.amplitudes[0]).norm() < 1e-15);
            assert!((r.weight.norm() - t.weight.norm()).abs() < 1e-15);
        }
        assert!((fidelity(&s, &round).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn projection_kills_vacuum_terms() {
        let s = SuperposedState::vacuum('a')
            .tensor(&SuperposedState::coherent('b', c(0.5, 0.0)))
            .unwrap();
        let p0 = s.project_fock('a'.into(), 0).unwrap();
        assert_eq!(p0.num_terms(), 1);
        assert_eq!(p0.weights()[0], c(1.0, 0.0));
        assert_eq!(p0.modes(), &[ModeLabel::Name('b')]);
        let p1 = s.project_fock('a'.into(), 1).unwrap();
        assert!(p1.is_empty());
        assert_eq!(p1.norm_sqr(), 0.0);
    }

    #[test]
    fn projection_completeness_single_mode() {
        let s = SuperposedState::cat('a', c(0.7, 0.0), c(0.1, 0.5), c(1.2, 0.0))
            .tensor(&SuperposedState::vacuum('b'))
            .unwrap();
        let total: f64 = (0..=40)
            .map(|n| s.project_fock('a'.into(), n).unwrap().norm_sqr())
            .sum();
        assert!((total - s.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn fused_projection_matches_sequential() {
        let s = SuperposedState::cat('a', c(0.7, 0.0), c(0.1, 0.5), c(1.2, 0.0))
            .tensor(&SuperposedState::cat(
                'b',
                c(0.2, 0.0),
                c(0.4, 0.0),
                c(0.6, 0.1),
            ))
            .unwrap();
        let seq = s
            .project_fock('a'.into(), 3)
            .unwrap()
            .project_fock('b'.into(), 2)
            .unwrap();
        let cache = FockKernelCache::new(&[c(1.2, 0.0), c(-1.2, 0.0)], 5);
        let fused = s
            .project_fock_many(&[('a'.into(), 3), ('b'.into(), 2)], Some(&cache))
            .unwrap();
        assert_eq!(seq.num_terms(), fused.num_terms());
        for (x, y) in seq.weights().iter().zip(fused.weights()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn prune_merges_and_drops() {
        let modes = vec![ModeLabel::Name('a')];
        let w = c(0.25, -0.5);
        let s = SuperposedState::new(
            modes.clone(),
            vec![
                CoherentTerm::new(w, vec![c(1.0, 0.0)]),
                CoherentTerm::new(w, vec![c(1.0, 1e-14)]),
                CoherentTerm::new(c(1e-20, 0.0), vec![c(0.0, 0.0)]),
            ],
        )
        .unwrap();
        let p = s.prune(1e-15);
        assert_eq!(p.num_terms(), 1);
        assert_eq!(p.weights()[0], w * 2.0);
        let unchanged = SuperposedState::cat('a', w, w, c(1.0, 0.0)).prune(1e-15);
        assert_eq!(unchanged.num_terms(), 2);
    }

    #[test]
    fn factorization_and_schmidt() {
        let x = SuperposedState::cat(4, c(0.6, 0.0), c(-0.8, 0.0), c(1.0, 0.0));
        let y = SuperposedState::cat(5, c(0.3, 0.2), c(0.5, 0.0), c(1.0, 0.0));
        let z = SuperposedState::cat(6, c(1.0, 0.0), c(0.0, 1.0), c(1.0, 0.0));
        let xyz = x.tensor(&y).unwrap().tensor(&z).unwrap();
        assert!(xyz.schmidt_rank_one(1, 1e-12));
        assert!(xyz.schmidt_rank_one(2, 1e-12));
        let f = xyz.factorize(1e-12).unwrap();
        assert!((fidelity(&f[0], &x).unwrap() - 1.0).abs() < 1e-13);
        assert!((fidelity(&f[1], &y).unwrap() - 1.0).abs() < 1e-13);
        assert!((fidelity(&f[2], &z).unwrap() - 1.0).abs() < 1e-13);

        let bell = SuperposedState::new(
            vec![4.into(), 5.into()],
            vec![
                CoherentTerm::new(c(1.0, 0.0), vec![c(1.0, 0.0), c(1.0, 0.0)]),
                CoherentTerm::new(c(1.0, 0.0), vec![c(-1.0, 0.0), c(-1.0, 0.0)]),
            ],
        )
        .unwrap();
        assert!(!bell.schmidt_rank_one(1, 1e-10));
        assert!(matches!(bell.factorize(1e-10), Err(Error::NotFactorizable)));
    }

    #[test]
    fn json_shape() {
        let s = SuperposedState::cat(7, c(1.0, 0.0), c(0.0, -1.0), c(0.5, 0.0));
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v["modes"][0], "7");
        assert_eq!(v["terms"][1]["w"][1], -1.0);
        assert_eq!(v["terms"][1]["beta"][0][0], -0.5);
        let back: SuperposedState = serde_json::from_value(v).unwrap();
        assert_eq!(back.weights(), s.weights());
    }

    #[test]
    fn rejects_non_finite() {
        let r = SuperposedState::new(
            vec!['a'.into()],
            vec![CoherentTerm::new(c(f64::NAN, 0.0), vec![c(0.0, 0.0)])],
        );
        assert!(matches!(r, Err(Error::NonFinite(_))));
        let r = SuperposedState::new(vec!['a'.into(), 'a'.into()], vec![]);
        assert!(matches!(r, Err(Error::DuplicateMode(_))));
    }
}
