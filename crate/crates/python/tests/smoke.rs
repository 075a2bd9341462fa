//! Runs python/smoke_test.py inside an embedded interpreter with the module
//! registered under its import name.

use std::ffi::CString;

use pyo3::prelude::*;
use rdsjump::rdsjump;

#[test]
fn python_smoke_script() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../python/smoke_test.py");
    let source = std::fs::read_to_string(path).expect("smoke script present");
    pyo3::append_to_inittab!(rdsjump);
    Python::initialize();
    Python::attach(|py| {
        let code = CString::new(source).unwrap();
        let globals = pyo3::types::PyDict::new(py);
        globals.set_item("__name__", "smoke").unwrap();
        py.run(&code, Some(&globals), None).unwrap();
        let main = globals.get_item("main").unwrap().expect("main defined");
        if let Err(e) = main.call0() {
            e.print(py);
            panic!("smoke script failed");
        }
    });
}
