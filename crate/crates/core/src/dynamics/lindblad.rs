//! Thermal Lindblad generator and its propagators.
//!
//! The generator is assembled directly in the energy eigenbasis, where the
//! secular structure makes it block sparse: populations form one block, and
//! coherences couple only inside degenerate subspaces. Each block is
//! exponentiated separately, which keeps `N = 6` (a 4096-dimensional
//! Liouville space) cheap. The full `4^N × 4^N` superoperator is still
//! available for small chains.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use super::jumps::{jump_channels, JumpChannel, JumpGrouping, OMEGA_TOL};
use crate::error::{validation, Error, Result};
use crate::numerics::{conjugate, conjugate_adjoint, identity, kron, matmul, ComplexMatrix, DensityMatrix, C64, ZERO};
use crate::spin::SpinChain;

/// Largest chain for which the eigenbasis Lindblad model is built.
pub const MAX_LINDBLAD_SITES: usize = 6;

/// Largest chain for which the dense superoperator is built.
pub const MAX_DENSE_SITES: usize = 5;

/// Propagated states with an eigenvalue below this are rejected as unstable.
pub const PROPAGATION_PSD_SLACK: f64 = 1e-6;

#[derive(Debug, Clone)]
struct GeneratorBlock {
    indices: Vec<usize>,
    matrix: ComplexMatrix,
}

/// `exp(L t)` in the eigenbasis, stored block by block.
#[derive(Debug)]
pub struct Propagator {
    chain: Arc<SpinChain>,
    time: f64,
    scalars: Vec<(usize, C64)>,
    blocks: Vec<(Vec<usize>, ComplexMatrix)>,
}

impl Propagator {
    pub fn time(&self) -> f64 {
        self.time
    }

    /// Applies the map to an eigenbasis operator, column-stacked.
    fn apply_eigen(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let d = x.nrows();
        let src = x.as_slice();
        let mut out = ComplexMatrix::from_element(d, d, ZERO);
        let dst = out.as_mut_slice();
        for &(k, f) in &self.scalars {
            dst[k] = f * src[k];
        }
        let mut buf = Vec::new();
        for (idx, m) in &self.blocks {
            buf.clear();
            buf.extend(idx.iter().map(|&k| src[k]));
            for (r, &k) in idx.iter().enumerate() {
                let mut acc = ZERO;
                for (c, &v) in buf.iter().enumerate() {
                    acc += m[(r, c)] * v;
                }
                dst[k] = acc;
            }
        }
        out
    }

    /// Maps a computational-basis operator (not necessarily normalized).
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let v = &self.chain.spectrum().eigenvectors;
        let out = conjugate(v, &self.apply_eigen(&conjugate_adjoint(v, rho)));
        hermitize(out)
    }
}

pub(crate) fn hermitize(m: ComplexMatrix) -> ComplexMatrix {
    let adj = m.adjoint();
    (m + adj).map(|z| z * 0.5)
}

/// `L[ρ] = −i[H,ρ] + Σ_c r_c 𝒟[A_c]ρ` with KMS-balanced rates.
#[derive(Debug)]
pub struct LindbladModel {
    chain: Arc<SpinChain>,
    kappa: f64,
    temperature: f64,
    grouping: JumpGrouping,
    channels: Vec<JumpChannel>,
    blocks: Vec<GeneratorBlock>,
    operators: OnceLock<Vec<(f64, ComplexMatrix, ComplexMatrix)>>,
    cache: Mutex<HashMap<u64, Arc<Propagator>>>,
}

impl LindbladModel {
    pub fn new(chain: Arc<SpinChain>, kappa: f64, temperature: f64, grouping: JumpGrouping) -> Result<Self> {
        Self::with_tolerance(chain, kappa, temperature, grouping, OMEGA_TOL)
    }

    pub fn with_tolerance(
        chain: Arc<SpinChain>,
        kappa: f64,
        temperature: f64,
        grouping: JumpGrouping,
        omega_tol: f64,
    ) -> Result<Self> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return validation(format!("temperature must be positive, got {temperature}"));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return validation(format!("κ must be non-negative, got {kappa}"));
        }
        if !(omega_tol > 0.0) {
            return validation(format!("omega_tol must be positive, got {omega_tol}"));
        }
        if chain.n_sites() > MAX_LINDBLAD_SITES {
            return Err(Error::ResourceGuard(format!(
                "Lindblad dynamics limited to N ≤ {MAX_LINDBLAD_SITES} (got N = {}); use κ = 0 for larger chains",
                chain.n_sites()
            )));
        }
        let channels = jump_channels(
            chain.spectrum(),
            chain.n_sites(),
            kappa,
            temperature,
            grouping,
            omega_tol,
        )?;
        let blocks = assemble_blocks(&chain.spectrum().eigenvalues, &channels);
        Ok(LindbladModel {
            chain,
            kappa,
            temperature,
            grouping,
            channels,
            blocks,
            operators: OnceLock::new(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn chain(&self) -> &Arc<SpinChain> {
        &self.chain
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn grouping(&self) -> JumpGrouping {
        self.grouping
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    /// Sizes of the independent blocks of the eigenbasis generator.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.indices.len()).collect()
    }

    fn dense_operators(&self) -> &[(f64, ComplexMatrix, ComplexMatrix)] {
        self.operators.get_or_init(|| {
            self.channels
                .iter()
                .map(|c| {
                    let a = c.operator(self.chain.spectrum());
                    let ada = matmul(&a.adjoint(), &a);
                    (c.rate, a, ada)
                })
                .collect()
        })
    }

    /// `L[ρ]` evaluated with computational-basis operators.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let h = self.chain.hamiltonian();
        let i = C64::new(0.0, 1.0);
        let mut out = (matmul(h, rho) - matmul(rho, h)).map(|z| -i * z);
        for (rate, a, ada) in self.dense_operators() {
            let jump = matmul(&matmul(a, rho), &a.adjoint());
            let anti = matmul(ada, rho) + matmul(rho, ada);
            out += (jump - anti.map(|z| z * 0.5)).map(|z| z * *rate);
        }
        out
    }

    /// The generator as a `4^N × 4^N` matrix acting on column-stacked `vec(ρ)`.
    pub fn liouvillian(&self) -> Result<ComplexMatrix> {
        let n = self.chain.n_sites();
        if n > MAX_DENSE_SITES {
            return Err(Error::ResourceGuard(format!(
                "dense superoperator limited to N ≤ {MAX_DENSE_SITES} (got N = {n})"
            )));
        }
        let d = self.chain.dim();
        let id = identity(d);
        let h = self.chain.hamiltonian();
        let i = C64::new(0.0, 1.0);
        let mut l = (kron(&id, h) - kron(&h.transpose(), &id)).map(|z| -i * z);
        for (rate, a, ada) in self.dense_operators() {
            let term = kron(&a.conjugate(), a) - (kron(&id, ada) + kron(&ada.transpose(), &id)).map(|z| z * 0.5);
            l += term.map(|z| z * *rate);
        }
        Ok(l)
    }

    /// `exp(L t)` on the dense superoperator.
    pub fn dense_propagator(&self, t: f64) -> Result<ComplexMatrix> {
        check_time(t)?;
        Ok(self.liouvillian()?.map(|z| z * t).exp())
    }

    /// Block propagator for time `t`, cached by the bit pattern of `t`.
    pub fn propagator(&self, t: f64) -> Result<Arc<Propagator>> {
        check_time(t)?;
        let key = t.to_bits();
        if let Some(p) = self.cache.lock().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.build_propagator(t)?);
        let mut cache = self.cache.lock().unwrap();
        Ok(cache.entry(key).or_insert(p).clone())
    }

    fn build_propagator(&self, t: f64) -> Result<Propagator> {
        let mut scalars = Vec::new();
        let mut blocks = Vec::new();
        for b in &self.blocks {
            if b.indices.len() == 1 {
                scalars.push((b.indices[0], (b.matrix[(0, 0)] * t).exp()));
            } else {
                let e = b.matrix.map(|z| z * t).exp();
                if e.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "block exponential of size {} is not finite at t = {t}",
                        b.indices.len()
                    )));
                }
                blocks.push((b.indices.clone(), e));
            }
        }
        Ok(Propagator {
            chain: self.chain.clone(),
            time: t,
            scalars,
            blocks,
        })
    }

    /// `ρ(t) = e^{Lt} ρ0`, validated as a density matrix.
    pub fn propagate(&self, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        let out = self.propagator(t)?.apply(rho0.matrix());
        DensityMatrix::with_psd_slack(out, PROPAGATION_PSD_SLACK)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return validation(format!("evolution time must be non-negative and finite, got {t}"));
    }
    Ok(())
}

/// Assembles the eigenbasis generator and splits it into connected blocks.
fn assemble_blocks(energies: &[f64], channels: &[JumpChannel]) -> Vec<GeneratorBlock> {
    let d = energies.len();
    let dd = d * d;
    let idx = |r: usize, c: usize| r + d * c;
    // Ordered maps keep the floating-point summation order reproducible.
    let mut entries: BTreeMap<(usize, usize), C64> = BTreeMap::new();
    let mut add = |row: usize, col: usize, v: C64| {
        *entries.entry((row, col)).or_insert(ZERO) += v;
    };

    for a in 0..d {
        for b in 0..d {
            add(idx(a, b), idx(a, b), C64::new(0.0, -(energies[a] - energies[b])));
        }
    }

    for ch in channels {
        let r = ch.rate;
        // A ρ A†
        for &(r1, c1, a1) in &ch.elements {
            for &(r2, c2, a2) in &ch.elements {
                add(idx(r1, r2), idx(c1, c2), a1 * a2.conj() * r);
            }
        }
        // A†A = Σ conj(a_k) a_l |c_k⟩⟨c_l| over r_k = r_l
        let mut ada: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for &(r1, c1, a1) in &ch.elements {
            for &(r2, c2, a2) in &ch.elements {
                if r1 == r2 {
                    *ada.entry((c1, c2)).or_insert(ZERO) += a1.conj() * a2;
                }
            }
        }
        for (&(p, q), &v) in &ada {
            let w = v * (-0.5 * r);
            for j in 0..d {
                add(idx(p, j), idx(q, j), w);
                add(idx(j, q), idx(j, p), w);
            }
        }
    }

    let mut uf = UnionFind::new(dd);
    for &(row, col) in entries.keys() {
        uf.union(row, col);
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for k in 0..dd {
        groups.entry(uf.find(k)).or_default().push(k);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.sort_by_key(|g| g[0]);

    let mut position = vec![(0usize, 0usize); dd];
    for (g, members) in groups.iter().enumerate() {
        for (local, &k) in members.iter().enumerate() {
            position[k] = (g, local);
        }
    }
    let mut blocks: Vec<GeneratorBlock> = groups
        .into_iter()
        .map(|indices| {
            let n = indices.len();
            GeneratorBlock {
                indices,
                matrix: ComplexMatrix::from_element(n, n, ZERO),
            }
        })
        .collect();
    for ((row, col), v) in entries {
        let (g, lr) = position[row];
        let (_, lc) = position[col];
        blocks[g].matrix[(lr, lc)] += v;
    }
    blocks
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}
