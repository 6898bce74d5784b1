use pyo3::prelude::*;

#[pymodule]
fn bipedsim(_m: &Bound<PyModule>) -> PyResult<()> { Ok(()) }
