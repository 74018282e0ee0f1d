//! Python module `ags_hbprm`: datasets, both samplers and the diagnostics.

use std::collections::HashMap;
use std::path::PathBuf;

use ags_core::diagnostics::monte_carlo_se;
use ags_core::{
    characteristics, io, run_ags, run_mwg, AgsConfig, ChainConfig, ChainOutput, DiagnosticsReport, EssInput, Family,
    Group, Init, MwgConfig, PriorConfig, RawDataset, SamplerKind, SynthSpec,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: ags_core::Error) -> PyErr {
    match e {
        ags_core::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Grouped count data. Zero counts are allowed here and rejected (or shifted) at fit time.
#[pyclass(module = "ags_hbprm", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    raw: RawDataset,
}

#[pymethods]
impl Dataset {
    /// Rows are grouped by label in order of first appearance.
    #[new]
    fn new(groups: Vec<String>, x: Vec<Vec<f64>>, y: Vec<u64>) -> PyResult<Self> {
        if groups.len() != x.len() || groups.len() != y.len() {
            return Err(PyValueError::new_err(format!(
                "groups, x and y differ in length ({}, {}, {})",
                groups.len(),
                x.len(),
                y.len()
            )));
        }
        let k = x.first().map_or(0, Vec::len);
        let mut order: Vec<(String, Vec<f64>, Vec<u64>)> = Vec::new();
        let mut index = HashMap::new();
        for (i, ((label, row), count)) in groups.into_iter().zip(x).zip(y).enumerate() {
            if row.len() != k {
                return Err(PyValueError::new_err(format!("row {i} has {} covariates, expected {k}", row.len())));
            }
            let j = *index.entry(label.clone()).or_insert_with(|| {
                order.push((label, Vec::new(), Vec::new()));
                order.len() - 1
            });
            order[j].1.extend(row);
            order[j].2.push(count);
        }
        let groups = order.into_iter().map(|(l, x, y)| Group::new(l, x, y, None)).collect();
        Ok(Dataset {
            raw: RawDataset::new(k, groups).map_err(to_py)?,
        })
    }

    /// Reads a CSV with header `group,x1,...,xK,y`.
    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Dataset {
            raw: io::read_raw_csv_file(&path).map_err(to_py)?,
        })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        let bytes = io::dataset_csv(&self.raw).map_err(to_py)?;
        io::write_atomic(&path, &bytes).map_err(to_py)
    }

    /// Copy without zero counts; groups left empty are dropped.
    fn without_zeros(&self) -> PyResult<Self> {
        Ok(Dataset {
            raw: self.raw.without_zeros().map_err(to_py)?,
        })
    }

    #[getter]
    fn num_groups(&self) -> usize {
        self.raw.groups().len()
    }

    #[getter]
    fn num_covariates(&self) -> usize {
        self.raw.num_covariates()
    }

    #[getter]
    fn num_observations(&self) -> usize {
        self.raw.num_observations()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.raw.groups().iter().map(|g| g.label().to_string()).collect()
    }

    #[getter]
    fn counts(&self) -> Vec<u64> {
        self.raw.counts().collect()
    }

    /// `N_d`, count range and the share of zeros and of counts in 1..=5.
    fn characteristics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = characteristics(self.raw.counts());
        let d = PyDict::new(py);
        d.set_item("n_d", c.n_d)?;
        d.set_item("range", c.range)?;
        d.set_item("pct_zero", c.pct_zero)?;
        d.set_item("pct_one_to_five", c.pct_one_to_five)?;
        Ok(d)
    }

    fn __len__(&self) -> usize {
        self.raw.num_observations()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(groups={}, covariates={}, observations={})",
            self.raw.groups().len(),
            self.raw.num_covariates(),
            self.raw.num_observations()
        )
    }
}

/// Retained draws of a fit together with its diagnostics.
#[pyclass(module = "ags_hbprm", frozen)]
struct Fit {
    output: ChainOutput,
    report: DiagnosticsReport,
}

#[pymethods]
impl Fit {
    #[getter]
    fn sampler(&self) -> &'static str {
        self.output.sampler.name()
    }

    /// `w[j,k]` row-major, then `mu[k]`, then `sigma2[k]`.
    #[getter]
    fn parameter_names(&self) -> Vec<String> {
        self.output.parameter_names()
    }

    /// `draws[c][t][p]`: chain, retained iteration, parameter.
    #[getter]
    fn draws(&self) -> Vec<Vec<Vec<f64>>> {
        self.output
            .draws
            .iter()
            .map(|chain| chain.iter().map(|s| s.flatten()).collect())
            .collect()
    }

    fn posterior_mean(&self) -> PyResult<HashMap<String, f64>> {
        let means = self.output.posterior_mean().map_err(to_py)?;
        Ok(self.output.parameter_names().into_iter().zip(means).collect())
    }

    #[getter]
    fn ess(&self) -> HashMap<String, f64> {
        self.output.parameter_names().into_iter().zip(self.report.ess.iter().copied()).collect()
    }

    #[getter]
    fn acceptance_rates(&self) -> Vec<Option<f64>> {
        self.output.chains.iter().map(|c| c.acceptance_rate).collect()
    }

    /// Summary figures: mean ESS, seconds per 1000 iterations, ESS per second, R², RMSE.
    fn diagnostics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = &self.report;
        let d = PyDict::new(py);
        d.set_item("sampler", &r.sampler)?;
        d.set_item("J", r.num_groups)?;
        d.set_item("K", r.num_covariates)?;
        d.set_item("N_d", r.characteristics.n_d)?;
        d.set_item("mean_ess", r.mean_ess)?;
        d.set_item("T_s", r.t_s)?;
        d.set_item("E_s", r.e_s)?;
        d.set_item("R2", r.r2)?;
        d.set_item("RMSE", r.rmse)?;
        d.set_item("notes", r.notes.clone())?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(sampler={}, chains={}, retained={}, mean_ess={:.1})",
            self.output.sampler.name(),
            self.output.num_chains(),
            self.output.retained_count,
            self.report.mean_ess
        )
    }
}

/// Runs `sampler` ("ags" or "mwg") on the dataset.
#[pyfunction]
#[pyo3(signature = (
    dataset, sampler = "ags", *, m = 0.0, tau2 = 1.0, a = 1.0, b = 1.0,
    warmup = 5000, keep = 5000, chains = 4, seed = 0, init = "prior-draw",
    shift_counts = None, step_scale = None
))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    dataset: &Dataset,
    sampler: &str,
    m: f64,
    tau2: f64,
    a: f64,
    b: f64,
    warmup: usize,
    keep: usize,
    chains: usize,
    seed: u64,
    init: &str,
    shift_counts: Option<u64>,
    step_scale: Option<f64>,
) -> PyResult<Fit> {
    let kind: SamplerKind = sampler.parse().map_err(to_py)?;
    let prior = PriorConfig::new(m, tau2, a, b).map_err(to_py)?;
    let chain_config = ChainConfig {
        n_warmup: warmup,
        n_keep: keep,
        n_chains: chains,
        seed,
        init: init.parse::<Init>().map_err(to_py)?,
    };
    let data = io::raw_to_dataset(dataset.raw.clone(), shift_counts).map_err(to_py)?;
    let counts: Vec<u64> = dataset.raw.counts().collect();
    let result = py.detach(|| -> ags_core::Result<(ChainOutput, DiagnosticsReport)> {
        let output = match kind {
            SamplerKind::Ags => run_ags(&data, &prior, &AgsConfig::from(chain_config))?,
            SamplerKind::Mwg => {
                let mut config = MwgConfig::from(chain_config);
                if let Some(s) = step_scale {
                    config.step_scale = s;
                }
                run_mwg(&data, &prior, &config)?
            }
        };
        let mut report = DiagnosticsReport::compute(&output, &data)?;
        report.characteristics = characteristics(counts);
        Ok((output, report))
    });
    let (output, report) = result.map_err(to_py)?;
    Ok(Fit { output, report })
}

/// Synthetic dataset and its generating coefficients (`J x K`, row-major).
#[pyfunction]
#[pyo3(signature = (family, groups, per_group, covariates, *, y_max = None, seed = 0))]
fn generate(
    family: &str,
    groups: usize,
    per_group: usize,
    covariates: usize,
    y_max: Option<f64>,
    seed: u64,
) -> PyResult<(Dataset, Vec<f64>)> {
    let spec = match family.parse::<Family>().map_err(to_py)? {
        Family::Large => SynthSpec::large(groups, per_group, covariates, seed),
        Family::Small => SynthSpec::small(groups, per_group, covariates, y_max.unwrap_or(f64::NAN), seed),
    };
    let s = ags_core::generate(&spec).map_err(to_py)?;
    Ok((Dataset { raw: s.data }, s.true_w))
}

/// Digamma at a positive integer.
#[pyfunction]
fn psi0(n: u64) -> PyResult<f64> {
    ags_core::psi0(n).map_err(to_py)
}

/// Trigamma at a positive integer.
#[pyfunction]
fn psi1(n: u64) -> PyResult<f64> {
    ags_core::psi1(n).map_err(to_py)
}

/// `(y, ks_distance, abs_mean_error)` of the Gaussian approximation to the log-gamma density.
#[pyfunction]
#[pyo3(signature = (counts = None))]
fn ks_curve(counts: Option<Vec<u64>>) -> PyResult<Vec<(u64, f64, f64)>> {
    let counts = counts.unwrap_or_else(|| ags_core::special::KS_CURVE_COUNTS.to_vec());
    let points = ags_core::ks_curve(&counts).map_err(to_py)?;
    Ok(points.into_iter().map(|p| (p.y, p.ks_distance, p.abs_mean_error)).collect())
}

/// Multi-chain effective sample size of `samples[chain][draw]`.
#[pyfunction]
fn effective_sample_size(samples: Vec<Vec<f64>>) -> PyResult<f64> {
    let input = EssInput::new(samples).map_err(to_py)?;
    ags_core::effective_sample_size(&input).map_err(to_py)
}

/// Monte Carlo standard error of the mean of `samples[chain][draw]`.
#[pyfunction]
fn mcse(samples: Vec<Vec<f64>>) -> PyResult<f64> {
    let input = EssInput::new(samples).map_err(to_py)?;
    monte_carlo_se(&input).map_err(to_py)
}

#[pymodule]
fn ags_hbprm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Fit>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(psi0, m)?)?;
    m.add_function(wrap_pyfunction!(psi1, m)?)?;
    m.add_function(wrap_pyfunction!(ks_curve, m)?)?;
    m.add_function(wrap_pyfunction!(effective_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(mcse, m)?)?;
    Ok(())
}
