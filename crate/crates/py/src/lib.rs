//! Python bindings. Scenarios and traces are wrapped as classes holding
//! their canonical JSON; the free functions mirror the command line.

pub mod api;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: String) -> PyErr {
    PyValueError::new_err(e)
}

/// A scenario document.
#[pyclass(name = "Scenario", module = "roadfuzz_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyScenario {
    json: String,
}

#[pymethods]
impl PyScenario {
    /// Parse and normalize a scenario document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let s = api::scenario(text).map_err(py_err)?;
        Ok(Self {
            json: roadfuzz::scenario::serialize_scenario(&s),
        })
    }

    fn to_json(&self) -> String {
        self.json.clone()
    }

    #[getter]
    fn scenario_id(&self) -> PyResult<String> {
        Ok(api::scenario(&self.json).map_err(py_err)?.scenario_id)
    }

    #[getter]
    fn ego_ids(&self) -> PyResult<Vec<String>> {
        let s = api::scenario(&self.json).map_err(py_err)?;
        Ok(s.ego_vehicles.into_iter().map(|e| e.id).collect())
    }

    #[getter]
    fn npc_count(&self) -> PyResult<usize> {
        Ok(api::scenario(&self.json).map_err(py_err)?.npc_count())
    }

    /// Validation findings as (severity, path, message) tuples.
    fn validate(&self) -> PyResult<Vec<(String, String, String)>> {
        api::validate(&self.json).map_err(py_err)
    }

    fn is_valid(&self) -> PyResult<bool> {
        Ok(self.validate()?.iter().all(|(sev, _, _)| sev != "error"))
    }

    #[pyo3(signature = (rng_seed, steps = 1))]
    fn mutate(&self, rng_seed: u64, steps: usize) -> PyResult<Self> {
        Ok(Self {
            json: api::mutate_scenario(&self.json, rng_seed, steps).map_err(py_err)?,
        })
    }

    /// Simulate with `agent` bound to every ego (the scenario's own
    /// references when None). `sim` is a JSON object of SimConfig overrides.
    #[pyo3(signature = (agent = None, sim = None))]
    fn run(&self, py: Python<'_>, agent: Option<String>, sim: Option<String>) -> PyResult<PyTrace> {
        let json = self.json.clone();
        let out = py.detach(move || api::simulate(&json, agent.as_deref(), sim.as_deref()));
        Ok(PyTrace {
            json: out.map_err(py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        let id = self.scenario_id().unwrap_or_default();
        format!("Scenario({id:?})")
    }
}

/// A recorded simulation run.
#[pyclass(name = "Trace", module = "roadfuzz_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyTrace {
    json: String,
}

#[pymethods]
impl PyTrace {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let t = api::trace(text).map_err(py_err)?;
        Ok(Self {
            json: roadfuzz::sim::serialize_trace(&t),
        })
    }

    fn to_json(&self) -> String {
        self.json.clone()
    }

    #[getter]
    fn termination(&self) -> PyResult<String> {
        Ok(api::trace(&self.json)
            .map_err(py_err)?
            .termination()
            .as_str()
            .to_string())
    }

    #[getter]
    fn steps(&self) -> PyResult<u64> {
        Ok(api::trace(&self.json).map_err(py_err)?.last().step)
    }

    #[getter]
    fn fitness(&self) -> PyResult<f64> {
        Ok(roadfuzz::engine::fitness_min_distance(
            &api::trace(&self.json).map_err(py_err)?,
        ))
    }

    /// Oracle verdicts and fitness with default thresholds, as JSON.
    fn evaluate(&self) -> PyResult<String> {
        api::evaluate(&self.json).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Trace(termination={:?})", self.termination().unwrap_or_default())
    }
}

/// Runs batches of scenarios over `workers` threads.
#[pyclass(name = "WorkerPool", module = "roadfuzz_py", frozen)]
pub struct PyWorkerPool {
    workers: usize,
    sim: Option<String>,
}

#[pymethods]
impl PyWorkerPool {
    #[new]
    #[pyo3(signature = (workers = 1, sim = None))]
    fn new(workers: usize, sim: Option<String>) -> PyResult<Self> {
        if workers == 0 {
            return Err(PyValueError::new_err("workers must be >= 1"));
        }
        api::sim_config(sim.as_deref()).map_err(py_err)?;
        Ok(Self { workers, sim })
    }

    #[getter]
    fn workers(&self) -> usize {
        self.workers
    }

    /// Traces in input order.
    #[pyo3(signature = (scenarios, agent = None))]
    fn execute(&self, py: Python<'_>, scenarios: Vec<PyScenario>, agent: Option<String>) -> PyResult<Vec<PyTrace>> {
        let texts: Vec<String> = scenarios.into_iter().map(|s| s.json).collect();
        let (k, sim) = (self.workers, self.sim.clone());
        let out = py.detach(move || api::execute_batch(&texts, agent.as_deref(), k, sim.as_deref()));
        Ok(out.map_err(py_err)?.into_iter().map(|json| PyTrace { json }).collect())
    }
}

#[pyfunction]
fn towns() -> Vec<String> {
    api::towns()
}

#[pyfunction]
fn map_json(town: &str) -> PyResult<String> {
    api::map_json(town).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (num, town = "Town01-lite", min_length = 50.0, max_length = 200.0, rng_seed = 0))]
fn seed_generate(num: usize, town: &str, min_length: f64, max_length: f64, rng_seed: u64) -> PyResult<Vec<PyScenario>> {
    let docs = api::seed_scenarios(town, num, min_length, max_length, rng_seed).map_err(py_err)?;
    Ok(docs.into_iter().map(|json| PyScenario { json }).collect())
}

/// Run a search from a config file. Returns (run directory, report JSON).
#[pyfunction]
fn run(py: Python<'_>, config: String) -> PyResult<(String, String)> {
    py.detach(move || api::run_config(&config)).map_err(py_err)
}

#[pyfunction]
fn report(run_dir: &str) -> PyResult<String> {
    api::report(run_dir).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (trace, out, stride = 20))]
fn replay(trace: &str, out: &str, stride: u64) -> PyResult<Vec<String>> {
    api::replay(trace, out, stride).map_err(py_err)
}

#[pymodule]
fn roadfuzz_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyWorkerPool>()?;
    m.add_function(wrap_pyfunction!(towns, m)?)?;
    m.add_function(wrap_pyfunction!(map_json, m)?)?;
    m.add_function(wrap_pyfunction!(seed_generate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    Ok(())
}
