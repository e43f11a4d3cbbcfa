use num_bigint::BigInt;
use num_rational::BigRational;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use renormkit::pipeline::{run_pipeline, series_csv, ExperimentConfig};
use renormkit::Permutation;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Partial quotients a_1, a_2, ... of p/q in (0, 1).
#[pyfunction]
#[pyo3(signature = (p, q, max_terms=64))]
fn continued_fraction(p: BigInt, q: BigInt, max_terms: usize) -> PyResult<Vec<BigInt>> {
    if q == BigInt::ZERO {
        return Err(PyValueError::new_err("zero denominator"));
    }
    Ok(renormkit::rauzy::continued_fraction(&BigRational::new(p, q), max_terms))
}

/// Singularity orbits and kappa of the permutation given by two rows of letters.
#[pyfunction]
fn singularity(top: &str, bottom: &str) -> PyResult<(usize, Vec<Vec<usize>>)> {
    let s = Permutation::from_rows(top, bottom).map_err(value_err)?.singularity().map_err(value_err)?;
    Ok((s.kappa, s.orbits))
}

/// Number of irreducible permutations on `d` letters.
#[pyfunction]
fn irreducible_count(d: usize) -> usize {
    renormkit::combinat::irreducible_permutations(d).len()
}

/// Hilbert projective distance between two positive vectors.
#[pyfunction]
fn hilbert_metric(v: Vec<f64>, w: Vec<f64>) -> PyResult<f64> {
    renormkit::affine::hilbert_metric(&v, &w).map_err(value_err)
}

/// Runs an experiment config (JSON text) and returns the report as JSON text.
#[pyfunction]
fn pipeline(config: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config).map_err(value_err)?;
    let rep = run_pipeline(&cfg).map_err(value_err)?;
    serde_json::to_string(&rep).map_err(value_err)
}

/// Per-map CSV series of an experiment config.
#[pyfunction]
fn series(config: &str) -> PyResult<Vec<String>> {
    let cfg = ExperimentConfig::from_json(config).map_err(value_err)?;
    let rep = run_pipeline(&cfg).map_err(value_err)?;
    Ok(rep.maps.iter().map(|m| series_csv(&m.rows)).collect())
}

/// Built-in checks as (name, passed, seconds, detail) tuples.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn selftest(py: Python<'_>, seed: u64) -> Vec<(String, bool, f64, String)> {
    py.detach(|| renormkit::selftest::run(seed))
        .into_iter()
        .map(|r| (r.name.to_string(), r.passed, r.seconds, r.detail))
        .collect()
}

#[pymodule]
fn renormkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(continued_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(singularity, m)?)?;
    m.add_function(wrap_pyfunction!(irreducible_count, m)?)?;
    m.add_function(wrap_pyfunction!(hilbert_metric, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(series, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    m.add("GOLDEN_RECOVERY", renormkit::selftest::GOLDEN_RECOVERY)?;
    m.add("GOLDEN_CIRCLE_PAIR", renormkit::selftest::GOLDEN_CIRCLE_PAIR)?;
    Ok(())
}
