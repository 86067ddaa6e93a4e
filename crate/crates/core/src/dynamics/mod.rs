//! Inter-measurement channels.
//!
//! Every channel implements [`Dynamics`] and is created by a named
//! [`DynamicsFactory`]; [`DynamicsRegistry`] resolves the name at runtime.
//!
//! | name               | channel                                                    |
//! |--------------------|------------------------------------------------------------|
//! | `unitary`          | `e^{−iHτ} ρ e^{iHτ}`                                       |
//! | `lindblad`         | thermal Lindblad, one jump operator per eigenpair          |
//! | `lindblad-grouped` | thermal Lindblad, one jump operator per Bohr frequency     |
//! | `lindblad-dense`   | as `lindblad`, propagated with the full superoperator      |
//! | `reset`            | `ρ ↦ Tr(ρ) ρ_th`, the infinite-κ limit                     |

mod jumps;
mod lindblad;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use jumps::{
    bohr_frequencies, build_jump_operators, eigenbasis_coupling, jump_channels, BohrTransition, JumpChannel,
    JumpGrouping, OMEGA_TOL,
};
pub use lindblad::{LindbladModel, Propagator, MAX_DENSE_SITES, MAX_LINDBLAD_SITES, PROPAGATION_PSD_SLACK};

use crate::error::{validation, Error, Result};
use crate::numerics::{conjugate, fidelity, operator_function, trace, ComplexMatrix, DensityMatrix, C64};
use crate::spin::{SpinChain, ThermalProbe};

/// Fidelity that defines the thermalization time.
pub const T95_FIDELITY: f64 = 0.95;

/// One evolution interval of length `τ` at a fixed bath temperature.
pub trait Dynamics: Send + Sync {
    fn name(&self) -> &'static str;
    fn chain(&self) -> &Arc<SpinChain>;
    fn temperature(&self) -> f64;
    fn tau(&self) -> f64;
    /// Linear map on (possibly unnormalized) states.
    fn evolve(&self, rho: &ComplexMatrix) -> ComplexMatrix;
    /// The interval unitary when the channel is a pure conjugation.
    fn unitary(&self) -> Option<&ComplexMatrix> {
        None
    }
}

/// Parameters shared by every channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsParams {
    pub kappa: f64,
    pub tau: f64,
    pub omega_tol: f64,
}

impl DynamicsParams {
    pub fn new(kappa: f64, tau: f64) -> Self {
        DynamicsParams {
            kappa,
            tau,
            omega_tol: OMEGA_TOL,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return validation(format!("τ must be positive, got {}", self.tau));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return validation(format!("κ must be non-negative, got {}", self.kappa));
        }
        Ok(())
    }
}

pub trait DynamicsFactory: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn build(&self, chain: &Arc<SpinChain>, temperature: f64, params: &DynamicsParams) -> Result<Arc<dyn Dynamics>>;
}

/// Name → factory lookup.
pub struct DynamicsRegistry {
    factories: BTreeMap<&'static str, Box<dyn DynamicsFactory>>,
}

impl DynamicsRegistry {
    pub fn empty() -> Self {
        DynamicsRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(UnitaryFactory));
        r.register(Box::new(LindbladFactory {
            name: "lindblad",
            grouping: JumpGrouping::PerPair,
            dense: false,
        }));
        r.register(Box::new(LindbladFactory {
            name: "lindblad-grouped",
            grouping: JumpGrouping::ByFrequency,
            dense: false,
        }));
        r.register(Box::new(LindbladFactory {
            name: "lindblad-dense",
            grouping: JumpGrouping::PerPair,
            dense: true,
        }));
        r.register(Box::new(ResetFactory));
        r
    }

    pub fn register(&mut self, f: Box<dyn DynamicsFactory>) {
        self.factories.insert(f.name(), f);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn DynamicsFactory> {
        self.factories.get(name).map(|f| f.as_ref()).ok_or_else(|| {
            Error::Validation(format!(
                "unknown dynamics '{name}'; available: {}",
                self.names().join(", ")
            ))
        })
    }

    pub fn build(
        &self,
        name: &str,
        chain: &Arc<SpinChain>,
        temperature: f64,
        params: &DynamicsParams,
    ) -> Result<Arc<dyn Dynamics>> {
        self.get(name)?.build(chain, temperature, params)
    }
}

impl Default for DynamicsRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

/// Closed evolution over one interval.
pub struct UnitaryDynamics {
    chain: Arc<SpinChain>,
    temperature: f64,
    tau: f64,
    unitary: ComplexMatrix,
}

impl UnitaryDynamics {
    pub fn new(chain: Arc<SpinChain>, temperature: f64, tau: f64) -> Result<Self> {
        let unitary = operator_function(chain.spectrum(), |e| C64::from_polar(1.0, -e * tau))?;
        Ok(UnitaryDynamics {
            chain,
            temperature,
            tau,
            unitary,
        })
    }
}

impl Dynamics for UnitaryDynamics {
    fn name(&self) -> &'static str {
        "unitary"
    }
    fn chain(&self) -> &Arc<SpinChain> {
        &self.chain
    }
    fn temperature(&self) -> f64 {
        self.temperature
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn evolve(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        conjugate(&self.unitary, rho)
    }
    fn unitary(&self) -> Option<&ComplexMatrix> {
        Some(&self.unitary)
    }
}

/// Thermal Lindblad evolution over one interval, with the propagator built up front.
pub struct LindbladDynamics {
    name: &'static str,
    model: Arc<LindbladModel>,
    tau: f64,
    propagator: Arc<Propagator>,
}

impl LindbladDynamics {
    pub fn new(model: Arc<LindbladModel>, tau: f64) -> Result<Self> {
        let propagator = model.propagator(tau)?;
        let name = match model.grouping() {
            JumpGrouping::PerPair => "lindblad",
            JumpGrouping::ByFrequency => "lindblad-grouped",
        };
        Ok(LindbladDynamics {
            name,
            model,
            tau,
            propagator,
        })
    }

    pub fn model(&self) -> &Arc<LindbladModel> {
        &self.model
    }
}

impl Dynamics for LindbladDynamics {
    fn name(&self) -> &'static str {
        self.name
    }
    fn chain(&self) -> &Arc<SpinChain> {
        self.model.chain()
    }
    fn temperature(&self) -> f64 {
        self.model.temperature()
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn evolve(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        self.propagator.apply(rho)
    }
}

/// Lindblad evolution through the dense `4^N × 4^N` propagator.
pub struct DenseLindbladDynamics {
    model: Arc<LindbladModel>,
    tau: f64,
    superpropagator: ComplexMatrix,
}

impl DenseLindbladDynamics {
    pub fn new(model: Arc<LindbladModel>, tau: f64) -> Result<Self> {
        let superpropagator = model.dense_propagator(tau)?;
        Ok(DenseLindbladDynamics {
            model,
            tau,
            superpropagator,
        })
    }
}

impl Dynamics for DenseLindbladDynamics {
    fn name(&self) -> &'static str {
        "lindblad-dense"
    }
    fn chain(&self) -> &Arc<SpinChain> {
        self.model.chain()
    }
    fn temperature(&self) -> f64 {
        self.model.temperature()
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn evolve(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let d = rho.nrows();
        let v = nalgebra::DVector::from_column_slice(rho.as_slice());
        let out = &self.superpropagator * v;
        lindblad::hermitize(ComplexMatrix::from_column_slice(d, d, out.as_slice()))
    }
}

/// Complete rethermalization between measurements.
pub struct ResetDynamics {
    probe: ThermalProbe,
    tau: f64,
}

impl ResetDynamics {
    pub fn new(chain: Arc<SpinChain>, temperature: f64, tau: f64) -> Result<Self> {
        Ok(ResetDynamics {
            probe: ThermalProbe::new(chain, temperature)?,
            tau,
        })
    }
}

impl Dynamics for ResetDynamics {
    fn name(&self) -> &'static str {
        "reset"
    }
    fn chain(&self) -> &Arc<SpinChain> {
        self.probe.chain()
    }
    fn temperature(&self) -> f64 {
        self.probe.temperature()
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn evolve(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let w = trace(rho).re;
        self.probe.gibbs().matrix().map(|z| z * w)
    }
}

struct UnitaryFactory;

impl DynamicsFactory for UnitaryFactory {
    fn name(&self) -> &'static str {
        "unitary"
    }
    fn description(&self) -> &'static str {
        "closed evolution under H; κ is ignored"
    }
    fn build(&self, chain: &Arc<SpinChain>, temperature: f64, params: &DynamicsParams) -> Result<Arc<dyn Dynamics>> {
        params.validate()?;
        Ok(Arc::new(UnitaryDynamics::new(chain.clone(), temperature, params.tau)?))
    }
}

struct LindbladFactory {
    name: &'static str,
    grouping: JumpGrouping,
    dense: bool,
}

impl DynamicsFactory for LindbladFactory {
    fn name(&self) -> &'static str {
        self.name
    }
    fn description(&self) -> &'static str {
        match (self.grouping, self.dense) {
            (_, true) => "thermal Lindblad, per-eigenpair jumps, dense superoperator propagator",
            (JumpGrouping::PerPair, false) => "thermal Lindblad, per-eigenpair jumps",
            (JumpGrouping::ByFrequency, false) => "thermal Lindblad, jumps summed over each Bohr frequency",
        }
    }
    fn build(&self, chain: &Arc<SpinChain>, temperature: f64, params: &DynamicsParams) -> Result<Arc<dyn Dynamics>> {
        params.validate()?;
        let model = Arc::new(LindbladModel::with_tolerance(
            chain.clone(),
            params.kappa,
            temperature,
            self.grouping,
            params.omega_tol,
        )?);
        if self.dense {
            Ok(Arc::new(DenseLindbladDynamics::new(model, params.tau)?))
        } else {
            Ok(Arc::new(LindbladDynamics::new(model, params.tau)?))
        }
    }
}

struct ResetFactory;

impl DynamicsFactory for ResetFactory {
    fn name(&self) -> &'static str {
        "reset"
    }
    fn description(&self) -> &'static str {
        "state replaced by the Gibbs state after every interval (κ → ∞)"
    }
    fn build(&self, chain: &Arc<SpinChain>, temperature: f64, params: &DynamicsParams) -> Result<Arc<dyn Dynamics>> {
        params.validate()?;
        Ok(Arc::new(ResetDynamics::new(chain.clone(), temperature, params.tau)?))
    }
}

/// Fidelity with the Gibbs state at times `0, dt, 2dt, …, steps·dt`.
pub fn fidelity_curve(model: &LindbladModel, rho0: &DensityMatrix, dt: f64, steps: usize) -> Result<Vec<f64>> {
    let target = ThermalProbe::new(model.chain().clone(), model.temperature())?;
    let step = model.propagator(dt)?;
    let mut rho = rho0.matrix().clone();
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        if k > 0 {
            rho = step.apply(&rho);
        }
        let state = DensityMatrix::with_psd_slack(rho.clone(), PROPAGATION_PSD_SLACK)?;
        out.push(fidelity(&state, target.gibbs())?);
    }
    Ok(out)
}

/// Smallest grid time `k·dt ≤ t_max` at which the fidelity with the Gibbs
/// state reaches 0.95, or `None`.
pub fn thermalization_time_t95(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_max: f64,
    dt: f64,
) -> Result<Option<f64>> {
    if !(dt > 0.0) || !(t_max > 0.0) {
        return validation(format!(
            "t95 needs dt > 0 and t_max > 0, got dt = {dt}, t_max = {t_max}"
        ));
    }
    let target = ThermalProbe::new(model.chain().clone(), model.temperature())?;
    let step = model.propagator(dt)?;
    let mut rho = rho0.matrix().clone();
    let steps = (t_max / dt + 1e-9).floor() as usize;
    for k in 0..=steps {
        if k > 0 {
            rho = step.apply(&rho);
        }
        let state = DensityMatrix::with_psd_slack(rho.clone(), PROPAGATION_PSD_SLACK)?;
        if fidelity(&state, target.gibbs())? >= T95_FIDELITY {
            return Ok(Some(k as f64 * dt));
        }
    }
    Ok(None)
}
