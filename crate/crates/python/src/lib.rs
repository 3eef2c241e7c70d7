//! Python bindings: lattices, drivers, reflected solves, games, ladders and
//! scenario runs. Processes cross the boundary as lists of levels.

use dynkin_core::constrained::DEFAULT_SCHEDULE;
use dynkin_core::dynkin::SweepMode;
use dynkin_core::scenario::{parse_scenario, run_scenario as run_core_scenario};
use dynkin_core::{
    constrained_report, game_value, run_ladder, saddle_times, solve_drbsde_penalized, verify_saddle,
    AdaptedProcess, Barriers, ConstraintSpec, Driver, GameInstance, GeneratorSpec, LadderOptions,
    Lattice, LatticeMode, SolutionTriple, StoppingRule,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_mode(mode: &str) -> PyResult<LatticeMode> {
    match mode {
        "full_tree" => Ok(LatticeMode::FullTree),
        "recombining" => Ok(LatticeMode::Recombining),
        other => Err(value_error(format!(
            "mode must be 'full_tree' or 'recombining', got '{other}'"
        ))),
    }
}

fn parse_constraint(family: &str, lam: f64, c: f64) -> PyResult<ConstraintSpec> {
    let spec = match family {
        "none" => ConstraintSpec::None,
        "abs_z" => ConstraintSpec::AbsZ { lambda: lam },
        "neg_z" => ConstraintSpec::NegZ { lambda: lam },
        "z_above_c" => ConstraintSpec::ZAboveC { c, lambda: lam },
        other => return Err(value_error(format!("unknown constraint family '{other}'"))),
    };
    spec.validate().map_err(value_error)?;
    Ok(spec)
}

fn rule_nodes(rule: &StoppingRule) -> Vec<(usize, usize)> {
    rule.interior_nodes()
        .into_iter()
        .map(|n| (n.level, n.index))
        .collect()
}

#[pyclass(name = "Lattice", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLattice {
    inner: Lattice,
}

#[pymethods]
impl PyLattice {
    #[new]
    #[pyo3(signature = (horizon, steps, mode = "full_tree"))]
    fn new(horizon: f64, steps: usize, mode: &str) -> PyResult<Self> {
        let inner = Lattice::new(horizon, steps, parse_mode(mode)?).map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.inner.mode() {
            LatticeMode::FullTree => "full_tree",
            LatticeMode::Recombining => "recombining",
        }
    }

    fn level_size(&self, level: usize) -> usize {
        self.inner.level_size(level)
    }

    fn time(&self, level: usize) -> f64 {
        self.inner.time(level)
    }

    /// Walk values `w` at every node of `level`.
    fn walk(&self, level: usize) -> PyResult<Vec<f64>> {
        if level > self.inner.steps() {
            return Err(value_error(format!("level {level} beyond the horizon")));
        }
        self.inner
            .nodes_at(level)
            .map(|n| self.inner.walk_value(n).map_err(value_error))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Lattice(horizon={}, steps={}, mode='{}')",
            self.inner.horizon(),
            self.inner.steps(),
            self.mode()
        )
    }
}

#[pyclass(name = "Driver", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDriver {
    inner: Driver,
}

impl PyDriver {
    fn from_generator(g: GeneratorSpec) -> PyResult<Self> {
        g.validate().map_err(value_error)?;
        Ok(Self { inner: Driver::plain(g) })
    }
}

#[pymethods]
impl PyDriver {
    #[staticmethod]
    fn zero() -> Self {
        Self { inner: Driver::plain(GeneratorSpec::Zero) }
    }

    #[staticmethod]
    fn linear_z(b: f64) -> PyResult<Self> {
        Self::from_generator(GeneratorSpec::LinearZ { b })
    }

    #[staticmethod]
    fn kappa_abs(kappa: f64) -> PyResult<Self> {
        Self::from_generator(GeneratorSpec::KappaAbs { kappa })
    }

    #[staticmethod]
    fn linear_yz(a: f64, b: f64) -> PyResult<Self> {
        Self::from_generator(GeneratorSpec::LinearYZ { a, b })
    }

    /// `g + weight * phi` for a constraint family.
    #[pyo3(signature = (constraint, lam, weight, c = 0.0))]
    fn penalized(&self, constraint: &str, lam: f64, weight: f64, c: f64) -> PyResult<Self> {
        let phi = parse_constraint(constraint, lam, c)?;
        Ok(Self {
            inner: Driver::penalized(self.inner.generator, phi, weight),
        })
    }

    fn eval(&self, t: f64, y: f64, z: f64) -> f64 {
        self.inner.eval(t, y, z)
    }

    #[getter]
    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz()
    }

    #[getter]
    fn is_coherent(&self) -> bool {
        self.inner.is_coherent()
    }

    fn __repr__(&self) -> String {
        format!("Driver({:?})", self.inner)
    }
}

#[pyclass(name = "Barriers", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBarriers {
    inner: Barriers,
}

#[pymethods]
impl PyBarriers {
    /// Barriers from per-level node values, `lower[level][index]`.
    #[new]
    fn new(lattice: &PyLattice, lower: Vec<Vec<f64>>, upper: Vec<Vec<f64>>) -> PyResult<Self> {
        let lat = &lattice.inner;
        let lower = AdaptedProcess::from_levels(lat, lower).map_err(value_error)?;
        let upper = AdaptedProcess::from_levels(lat, upper).map_err(value_error)?;
        let inner = Barriers::new(lat, lower, upper).map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn lower(&self) -> Vec<Vec<f64>> {
        self.inner.lower().levels().to_vec()
    }

    #[getter]
    fn upper(&self) -> Vec<Vec<f64>> {
        self.inner.upper().levels().to_vec()
    }
}

#[pyclass(name = "Solution", frozen)]
struct PySolution {
    inner: SolutionTriple,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        self.inner.x.levels().to_vec()
    }

    #[getter]
    fn z(&self) -> Vec<Vec<f64>> {
        self.inner.z.levels().to_vec()
    }

    /// Upward push applied at each node.
    #[getter]
    fn kplus(&self) -> Vec<Vec<f64>> {
        self.inner.kplus_increment.levels().to_vec()
    }

    /// Downward push applied at each node.
    #[getter]
    fn kminus(&self) -> Vec<Vec<f64>> {
        self.inner.kminus_increment.levels().to_vec()
    }

    #[getter]
    fn root(&self) -> f64 {
        self.inner.x.root()
    }
}

#[pyclass(name = "SaddleReport", frozen, get_all)]
struct PySaddleReport {
    value_root: f64,
    saddle_value: f64,
    lower_value: f64,
    upper_value: f64,
    max_left_violation: f64,
    max_right_violation: f64,
    pairs_checked: usize,
    mode: &'static str,
    tau_star: Vec<(usize, usize)>,
    sigma_star: Vec<(usize, usize)>,
}

#[pyclass(name = "Ladder", frozen, get_all)]
struct PyLadder {
    schedule: Vec<f64>,
    root_values: Vec<f64>,
    gaps: Vec<f64>,
    monotonicity_violation: f64,
    tau_monotone: bool,
    sigma_monotone: bool,
    monotone_scheme: bool,
    value_estimate: f64,
    stabilized: bool,
    left_violation: Option<f64>,
    right_violation: Option<f64>,
    saddle_gap: f64,
    tau_limit: Vec<(usize, usize)>,
    sigma_limit: Vec<(usize, usize)>,
}

#[pyclass(name = "Game", frozen)]
struct PyGame {
    inner: GameInstance,
}

#[pymethods]
impl PyGame {
    #[new]
    fn new(lattice: &PyLattice, driver: &PyDriver, barriers: &PyBarriers) -> PyResult<Self> {
        let inner = GameInstance::new(lattice.inner.clone(), driver.inner, barriers.inner.clone())
            .map_err(value_error)?;
        Ok(Self { inner })
    }

    fn value(&self) -> PyResult<PySolution> {
        Ok(PySolution {
            inner: game_value(&self.inner).map_err(value_error)?,
        })
    }

    /// Interior nodes of the saddle rules `(tau*, sigma*)`.
    fn saddle_times(&self) -> PyResult<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
        let sol = game_value(&self.inner).map_err(value_error)?;
        let (tau, sigma) = saddle_times(&self.inner.lattice, &sol, &self.inner.barriers, 0);
        Ok((rule_nodes(&tau), rule_nodes(&sigma)))
    }

    fn verify_saddle(&self) -> PyResult<PySaddleReport> {
        let r = verify_saddle(&self.inner).map_err(value_error)?;
        Ok(PySaddleReport {
            value_root: r.value_root,
            saddle_value: r.saddle_value,
            lower_value: r.lower_value,
            upper_value: r.upper_value,
            max_left_violation: r.max_left_violation,
            max_right_violation: r.max_right_violation,
            pairs_checked: r.pairs_checked,
            mode: match r.mode {
                SweepMode::Pairwise => "pairwise",
                SweepMode::SingleSided => "single_sided",
            },
            tau_star: rule_nodes(&r.tau_star),
            sigma_star: rule_nodes(&r.sigma_star),
        })
    }

    /// Penalization ladder `g + m phi` over `schedule`.
    #[pyo3(signature = (constraint, lam, bound, schedule = None, c = 0.0, require_increasing_lower = true))]
    fn ladder(
        &self,
        constraint: &str,
        lam: f64,
        bound: f64,
        schedule: Option<Vec<f64>>,
        c: f64,
        require_increasing_lower: bool,
    ) -> PyResult<PyLadder> {
        let phi = parse_constraint(constraint, lam, c)?;
        let schedule = schedule.unwrap_or_else(|| DEFAULT_SCHEDULE.to_vec());
        let opts = LadderOptions {
            bound,
            require_increasing_lower,
        };
        let ladder = run_ladder(&self.inner, &phi, &schedule, opts).map_err(value_error)?;
        let rep = constrained_report(&ladder, &self.inner, &phi).map_err(value_error)?;
        Ok(PyLadder {
            root_values: ladder.levels.iter().map(|l| l.solution.x.root()).collect(),
            schedule: ladder.schedule.clone(),
            gaps: ladder.gaps.clone(),
            monotonicity_violation: ladder.monotonicity_violation,
            tau_monotone: ladder.tau_monotone,
            sigma_monotone: ladder.sigma_monotone,
            monotone_scheme: ladder.monotone_scheme,
            value_estimate: rep.value_estimate,
            stabilized: rep.stabilized,
            left_violation: rep.left_violation,
            right_violation: rep.right_violation,
            saddle_gap: rep.saddle_gap,
            tau_limit: rule_nodes(&rep.tau_limit),
            sigma_limit: rule_nodes(&rep.sigma_limit),
        })
    }
}

#[pyclass(name = "ScenarioReport", frozen, get_all)]
struct PyScenarioReport {
    name: String,
    passed: bool,
    /// `(name, value, tolerance, passed)` per check.
    checks: Vec<(String, f64, f64, bool)>,
    summary_json: String,
    values_csv: String,
}

/// Solves the plain backward equation; returns `(X, Z)` as level lists.
#[pyfunction]
fn solve_bsde(
    lattice: &PyLattice,
    driver: &PyDriver,
    terminal: Vec<f64>,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let (x, z) = dynkin_core::solve_bsde(&lattice.inner, &driver.inner, &terminal).map_err(value_error)?;
    Ok((x.levels().to_vec(), z.levels().to_vec()))
}

/// Doubly reflected solve; with `penalty` set, returns the penalized
/// approximation's `X` levels in the `x` field and zero pushes.
#[pyfunction]
#[pyo3(signature = (lattice, driver, barriers, terminal, penalty = None))]
fn solve_drbsde(
    lattice: &PyLattice,
    driver: &PyDriver,
    barriers: &PyBarriers,
    terminal: Vec<f64>,
    penalty: Option<f64>,
) -> PyResult<PySolution> {
    let lat = &lattice.inner;
    let inner = match penalty {
        None => dynkin_core::solve_drbsde(lat, &driver.inner, &barriers.inner, &terminal).map_err(value_error)?,
        Some(p) => {
            let (x, z) = solve_drbsde_penalized(lat, &driver.inner, &barriers.inner, &terminal, p)
                .map_err(value_error)?;
            SolutionTriple {
                x,
                z,
                kplus_increment: AdaptedProcess::zeros(lat),
                kminus_increment: AdaptedProcess::zeros(lat),
            }
        }
    };
    Ok(PySolution { inner })
}

/// Runs a scenario given as TOML text, with optional `key=value` overrides.
#[pyfunction]
#[pyo3(signature = (config, overrides = None))]
fn run_scenario(config: &str, overrides: Option<Vec<String>>) -> PyResult<PyScenarioReport> {
    let s = parse_scenario(config, &overrides.unwrap_or_default()).map_err(value_error)?;
    let r = run_core_scenario(&s).map_err(value_error)?;
    Ok(PyScenarioReport {
        name: s.name.clone(),
        passed: r.passed(),
        checks: r
            .checks
            .iter()
            .map(|c| (c.name.clone(), c.value, c.tolerance, c.passed))
            .collect(),
        summary_json: r.summary_json(),
        values_csv: r.values_csv(),
    })
}

#[pymodule]
fn dynkin_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLattice>()?;
    m.add_class::<PyDriver>()?;
    m.add_class::<PyBarriers>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyGame>()?;
    m.add_class::<PySaddleReport>()?;
    m.add_class::<PyLadder>()?;
    m.add_class::<PyScenarioReport>()?;
    m.add_function(wrap_pyfunction!(solve_bsde, m)?)?;
    m.add_function(wrap_pyfunction!(solve_drbsde, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
