use pyo3::prelude::*;
use pyo3::types::PyDict;

use co4::co4 as co4_module;

fn with_module<R>(f: impl FnOnce(Python<'_>, &Bound<'_, PyModule>) -> PyResult<R>) -> R {
    pyo3::append_to_inittab!(co4_module);
    Python::initialize();
    Python::attach(|py| {
        let m = py.import("co4").unwrap();
        f(py, &m).unwrap()
    })
}

#[test]
fn module_round_trip() {
    with_module(|py, m| {
        let (gamma, class): (f64, String) =
            m.getattr("overload_ratio")?.call1((1.0, 4.0))?.extract()?;
        assert_eq!((gamma, class.as_str()), (0.25, "Overload"));

        let p: Vec<f64> = m
            .getattr("softmax_row")?
            .call1((vec![0.0, 0.0],))?
            .extract()?;
        assert_eq!(p, vec![0.5, 0.5]);

        let state: String = m.getattr("classify_regime")?.call1((0.9, 0.9))?.extract()?;
        assert_eq!(state, "AwakeThought");

        let regime = m
            .getattr("Regime")?
            .call_method1("preset", ("AwakeThought",))?;
        let pi: Vec<Vec<f64>> = m
            .getattr("active_precision")?
            .call1((
                vec![vec![0.5]],
                vec![vec![1.0], vec![-1.0]],
                vec![0.0],
                vec![0.0],
                1.0,
                regime,
            ))?
            .extract()?;
        assert_eq!(pi, vec![vec![0.5, 0.05]]);

        let q = vec![vec![1.0, 0.0]];
        let k = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let v = vec![vec![1.0], vec![0.0]];
        let base: Vec<Vec<f64>> = m
            .getattr("baseline_attention")?
            .call1((q.clone(), k.clone(), v.clone()))?
            .extract()?;
        let gated: Vec<Vec<f64>> = m
            .getattr("gated_attention")?
            .call1((q, k, v, vec![vec![0.5, 0.5]]))?
            .extract()?;
        assert!((base[0][0] - gated[0][0]).abs() < 1e-15);

        let err = m.getattr("overload_ratio")?.call1((0.0, 1.0)).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));

        let kwargs = PyDict::new(py);
        kwargs.set_item("horizon", 50)?;
        let ep = m.getattr("run_episode")?.call((25, 50), Some(&kwargs))?;
        let positions: Vec<f64> = ep.get_item("positions")?.extract()?;
        assert_eq!(positions.len(), 50);
        let variant: String = ep.get_item("variant")?.extract()?;
        assert_eq!(variant, "Co4");
        Ok(())
    });
}
