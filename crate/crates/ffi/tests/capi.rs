use std::ffi::{CStr, CString};
use std::ptr;

use qprecond_ffi::*;

fn last_error() -> String {
    let p = qp_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn objective(name: &str, dims: usize) -> *mut QpObjective {
    let name = CString::new(name).unwrap();
    let mut obj = ptr::null_mut();
    assert_eq!(unsafe { qp_objective_new(name.as_ptr(), dims, &mut obj) }, QpStatus::Ok);
    assert!(!obj.is_null());
    obj
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(qp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn objective_round_trip() {
    let obj = objective("rastrigin", 3);
    unsafe {
        assert_eq!(qp_objective_dims(obj), 3);
        let mut f = f64::NAN;
        assert_eq!(qp_objective_eval(obj, [0.0; 3].as_ptr(), 3, &mut f), QpStatus::Ok);
        assert_eq!(f, 0.0);
        assert!(qp_last_error().is_null());
        assert_eq!(qp_objective_eval(obj, [1.0; 3].as_ptr(), 3, &mut f), QpStatus::Ok);
        assert!((f - 3.0).abs() < 1e-12);

        let (mut lb, mut ub) = ([0.0; 3], [0.0; 3]);
        assert_eq!(qp_objective_bounds(obj, lb.as_mut_ptr(), ub.as_mut_ptr(), 3), QpStatus::Ok);
        assert_eq!((lb, ub), ([-5.12; 3], [5.12; 3]));
        assert_eq!(qp_objective_bounds(obj, lb.as_mut_ptr(), ptr::null_mut(), 2), QpStatus::InvalidArgument);
        qp_objective_free(obj);
    }
}

#[test]
fn argument_errors_are_reported() {
    unsafe {
        let mut obj = ptr::null_mut();
        let bad = CString::new("sphere").unwrap();
        assert_eq!(qp_objective_new(bad.as_ptr(), 2, &mut obj), QpStatus::InvalidArgument);
        assert!(obj.is_null());
        assert!(last_error().contains("sphere"));

        assert_eq!(qp_objective_new(ptr::null(), 2, &mut obj), QpStatus::NullPointer);
        assert!(last_error().contains("name"));

        let good = objective("ackley", 2);
        let mut f = 0.0;
        assert_eq!(qp_objective_eval(good, [0.0; 3].as_ptr(), 3, &mut f), QpStatus::InvalidArgument);
        assert_eq!(qp_objective_eval(good, ptr::null(), 2, &mut f), QpStatus::NullPointer);
        assert_eq!(qp_objective_eval(ptr::null(), [0.0; 2].as_ptr(), 2, &mut f), QpStatus::NullPointer);
        assert_eq!(qp_objective_dims(ptr::null()), 0);
        qp_objective_free(good);
        qp_objective_free(ptr::null_mut());
        qp_string_free(ptr::null_mut());
    }
}

#[test]
fn precondition_returns_box_around_seed() {
    let obj = objective("rastrigin", 2);
    unsafe {
        let mut sb = ptr::null_mut();
        assert_eq!(qp_precondition(obj, 5, 200, 7, &mut sb), QpStatus::Ok);
        assert_eq!(qp_seedbox_dims(sb), 2);
        let (mut x, mut lb, mut ub) = ([0.0; 2], [0.0; 2], [0.0; 2]);
        assert_eq!(qp_seedbox_get(sb, x.as_mut_ptr(), lb.as_mut_ptr(), ub.as_mut_ptr(), 2), QpStatus::Ok);
        for i in 0..2 {
            assert!(lb[i] <= x[i] && x[i] <= ub[i]);
            assert!(lb[i] >= -5.12 && ub[i] <= 5.12);
        }
        assert_eq!(qp_seedbox_get(sb, x.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), 1), QpStatus::InvalidArgument);

        let mut again = ptr::null_mut();
        assert_eq!(qp_precondition(obj, 5, 200, 7, &mut again), QpStatus::Ok);
        let mut y = [0.0; 2];
        qp_seedbox_get(again, y.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), 2);
        assert_eq!(x, y);

        assert_eq!(qp_precondition(obj, 0, 200, 7, &mut again), QpStatus::Runtime);
        qp_seedbox_free(sb);
        qp_seedbox_free(again);
        qp_objective_free(obj);
    }
}

#[test]
fn config_errors_map_to_config_status() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let text = CString::new("objective = \"rastrigin\"\nflavour = 3\n").unwrap();
        assert_eq!(qp_config_from_toml(text.as_ptr(), &mut cfg), QpStatus::Config);
        assert!(cfg.is_null());
        let text = CString::new("qubits = 0\n").unwrap();
        assert_eq!(qp_config_from_toml(text.as_ptr(), &mut cfg), QpStatus::Config);
        assert_eq!(qp_config_default(&mut cfg), QpStatus::Ok);
        qp_config_free(cfg);
    }
}

#[test]
fn battery_report_through_handles() {
    let toml = "objective = \"rastrigin\"\ndims = [2]\nbudgets = [100]\ntrials = 3\n\
                modes = [\"hybrid\", \"classical\"]\nparticles = 64\nhybrid_particles = 16\npso_iterations = 20\n";
    let text = CString::new(toml).unwrap();
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(qp_config_from_toml(text.as_ptr(), &mut cfg), QpStatus::Ok);
        let mut report = ptr::null_mut();
        assert_eq!(qp_battery_run(cfg, &mut report), QpStatus::Ok);
        assert_eq!(qp_report_cell_count(report), 2);

        let mut cell = QpCellStats {
            mode: QpMode::Classical,
            dims: 0,
            budget: 0,
            trials: 0,
            n_correct: 0,
            median_bfgs_correct: 0.0,
        };
        assert_eq!(qp_report_cell(report, 0, &mut cell), QpStatus::Ok);
        assert_eq!((cell.mode, cell.dims, cell.budget, cell.trials), (QpMode::Hybrid, 2, 100, 3));
        assert!(cell.n_correct <= 3);
        assert_eq!(qp_report_cell(report, 1, &mut cell), QpStatus::Ok);
        assert_eq!((cell.mode, cell.budget), (QpMode::Classical, 0));
        assert_eq!(qp_report_cell(report, 2, &mut cell), QpStatus::InvalidArgument);

        let mut json = ptr::null_mut();
        assert_eq!(qp_report_to_json(report, &mut json), QpStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        qp_string_free(json);
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["records"].as_array().unwrap().len(), 6);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("r.csv").to_str().unwrap()).unwrap();
        let csv = CString::new("csv").unwrap();
        assert_eq!(qp_report_write(report, path.as_ptr(), csv.as_ptr()), QpStatus::Ok);
        let rows = std::fs::read_to_string(dir.path().join("r.csv")).unwrap().lines().count();
        assert_eq!(rows, 7);
        assert!(dir.path().join("r.boxplot.csv").exists());
        let xml = CString::new("xml").unwrap();
        assert_eq!(qp_report_write(report, path.as_ptr(), xml.as_ptr()), QpStatus::Config);
        let missing = CString::new(dir.path().join("no/such/dir.json").to_str().unwrap()).unwrap();
        let json_fmt = CString::new("json").unwrap();
        assert_eq!(qp_report_write(report, missing.as_ptr(), json_fmt.as_ptr()), QpStatus::Io);

        qp_report_free(report);
        qp_config_free(cfg);
    }
}

#[test]
fn errors_are_thread_local() {
    let mut obj = ptr::null_mut();
    let bad = CString::new("nope").unwrap();
    assert_eq!(unsafe { qp_objective_new(bad.as_ptr(), 2, &mut obj) }, QpStatus::InvalidArgument);
    let other = std::thread::spawn(|| qp_last_error().is_null()).join().unwrap();
    assert!(other);
    assert!(!qp_last_error().is_null());
}
