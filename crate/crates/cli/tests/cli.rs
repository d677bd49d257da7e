use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn hard_sphere(n_g: usize) -> Value {
    json!({
        "potential": { "kind": "hard-sphere", "params": { "diameter": 1.0 } },
        "envelope": {
            "s": 1.0,
            "lower": { "form": "inverse-power", "coefficient": 1.0, "exponent": 4.0, "length": 1.0 },
            "upper": { "form": "exponential", "coefficient": 1.0, "rate": 1.0 }
        },
        "thermo": { "beta": 1.0, "z_fraction": 0.5 },
        "grid": { "L": 2.0, "n_g": n_g },
        "ks": { "m_max": 2, "n_max": 3 },
        "oracle": { "N_max": 4 },
        "perturbation": { "kind": "exponential", "params": { "amplitude": 0.125, "rate": 1.0, "r_min": 1.0 } }
    })
}

fn ideal() -> Value {
    json!({
        "potential": { "kind": "ideal" },
        "thermo": { "z": 0.1 },
        "grid": { "L": 2.0, "n_g": 2 },
        "oracle": { "N_max": 5 },
        "perturbation": { "kind": "constant", "params": { "value": 0.05, "r_max": 1.5 } }
    })
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new(cfg: &Value) -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("run.json"), serde_json::to_string_pretty(cfg).unwrap()).unwrap();
        Self { dir }
    }

    fn config(&self) -> PathBuf {
        self.dir.path().join("run.json")
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn exec(&self, cmd: &str, out: &str, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_ksfluid"))
            .arg(cmd)
            .arg("--config")
            .arg(self.config())
            .arg("--out")
            .arg(self.out(out))
            .args(extra)
            .output()
            .unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_values(p: &Path) -> Vec<f64> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn check_passes_for_the_desk_case() {
    let r = Run::new(&hard_sphere(3));
    let o = r.exec("check", "out", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_json(&r.out("out/check.json"));
    assert_eq!(rep["pass"], true);
    let zr = rep["z_over_z_max"].as_f64().unwrap();
    assert!((zr - 0.5).abs() < 1e-12);
    let m = read_json(&r.out("out/manifest.json"));
    assert_eq!(m["status"], "ok");
    assert!(m["constants"]["c_beta"].as_f64().unwrap() > 4.18);
}

#[test]
fn check_refuses_activity_above_bound() {
    let mut cfg = hard_sphere(3);
    cfg["thermo"]["z_fraction"] = json!(2.0);
    let r = Run::new(&cfg);
    assert_eq!(code(&r.exec("check", "out", &[])), 1);
    assert_eq!(read_json(&r.out("out/manifest.json"))["status"], "refused");
    assert_eq!(code(&r.exec("solve", "solve", &[])), 1);
}

#[test]
fn configuration_errors_exit_two() {
    let r = Run::new(&hard_sphere(3));
    fs::write(r.config(), "{\"potential\": ").unwrap();
    assert_eq!(code(&r.exec("check", "out", &[])), 2);

    let mut cfg = hard_sphere(3);
    cfg["grid"]["side"] = json!(2.0);
    assert_eq!(code(&Run::new(&cfg).exec("check", "out", &[])), 2);

    let mut cfg = hard_sphere(3);
    cfg["oracle"]["N_max"] = json!(1);
    assert_eq!(code(&Run::new(&cfg).exec("oracle", "out", &[])), 2);

    let mut cfg = hard_sphere(3);
    cfg.as_object_mut().unwrap().remove("perturbation");
    assert_eq!(code(&Run::new(&cfg).exec("derivative", "out", &[])), 2);

    let o = Command::new(env!("CARGO_BIN_EXE_ksfluid"))
        .arg("solve")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn ideal_gas_needs_the_override() {
    let r = Run::new(&ideal());
    assert_eq!(code(&r.exec("solve", "plain", &[])), 1);
    let o = r.exec("solve", "forced", &["--override-admissibility"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for m in 1..=3 {
        let want = 0.1f64.powi(m);
        for v in csv_values(&r.out(&format!("forced/rho_{m}.csv"))) {
            assert!((v - want).abs() < 1e-12, "m={m}: {v}");
        }
    }
}

#[test]
fn ideal_gas_oracle_reports_the_exponential() {
    let r = Run::new(&ideal());
    let o = r.exec("oracle", "out", &["--override-admissibility"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let xi = read_json(&r.out("out/xi.json"));
    let diff = xi["ideal_gas"]["difference"].as_f64().unwrap().abs();
    assert!(diff <= xi["xi_tail"].as_f64().unwrap() * (1.0 + 1e-9));
    assert_eq!(read_json(&r.out("out/comparison.json"))["pass"], true);
}

#[test]
fn reruns_are_byte_identical() {
    let r = Run::new(&hard_sphere(2));
    assert_eq!(code(&r.exec("solve", "a", &[])), 0);
    assert_eq!(code(&r.exec("solve", "b", &["--threads", "2"])), 0);
    let names: Vec<_> = fs::read_dir(r.out("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert!(names.len() >= 4);
    for n in names {
        let a = fs::read(r.out("a").join(&n)).unwrap();
        let b = fs::read(r.out("b").join(&n)).unwrap();
        assert_eq!(a, b, "{n:?} differs");
    }
}

#[test]
fn config_hash_ignores_formatting() {
    let cfg = hard_sphere(2);
    let a = Run::new(&cfg);
    let b = Run::new(&cfg);
    fs::write(b.config(), serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(code(&a.exec("check", "out", &[])), 0);
    assert_eq!(code(&b.exec("check", "out", &[])), 0);
    let ha = read_json(&a.out("out/manifest.json"))["config_sha256"].clone();
    let hb = read_json(&b.out("out/manifest.json"))["config_sha256"].clone();
    assert_eq!(ha, hb);
    assert_eq!(ha.as_str().unwrap().len(), 64);
}

#[test]
fn missing_output_directories_are_created() {
    let r = Run::new(&hard_sphere(2));
    assert_eq!(code(&r.exec("solve", "deep/nested/dir", &[])), 0);
    assert!(r.out("deep/nested/dir/rho_1.csv").exists());
}

#[test]
fn zero_perturbation_gives_zero_derivative() {
    let mut cfg = hard_sphere(2);
    cfg["perturbation"] = json!({ "kind": "zero" });
    let r = Run::new(&cfg);
    let o = r.exec("derivative", "out", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for m in 1..=2 {
        assert!(csv_values(&r.out(&format!("out/drho_{m}.csv")))
            .iter()
            .all(|&v| v == 0.0));
    }
}

#[test]
fn derivative_records_slope_and_comparison() {
    let r = Run::new(&hard_sphere(2));
    let o = r.exec("derivative", "out", &["--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let slope = read_json(&r.out("out/fd.json"))["slope"].as_f64().unwrap();
    assert!((1.8..=2.2).contains(&slope), "slope {slope}");
    assert_eq!(
        read_json(&r.out("out/explicit_comparison.json"))["report"]["pass"],
        true
    );
    assert_eq!(read_json(&r.out("out/pinned_jstar.json"))["holds"], true);
    let m = read_json(&r.out("out/manifest.json"));
    assert!(m["bounds"]["derivative_budget"]["total"].as_f64().unwrap() > 0.0);
    assert_eq!(m["seed"], 3);
}

#[test]
fn oversized_perturbation_is_refused() {
    let mut cfg = hard_sphere(2);
    cfg["perturbation"]["params"]["amplitude"] = json!(0.9);
    let r = Run::new(&cfg);
    let o = r.exec("derivative", "out", &[]);
    assert_eq!(code(&o), 1);
    assert!(read_json(&r.out("out/error.json"))["error"]
        .as_str()
        .unwrap()
        .contains("t0"));
}

#[test]
fn single_box_sweep_has_zero_differences() {
    let mut cfg = hard_sphere(2);
    cfg["sweep"] = json!({ "inner_side": 1.0, "sides": [2.0], "spacing": 0.5 });
    let r = Run::new(&cfg);
    let o = r.exec("limit-sweep", "out", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_json(&r.out("out/sweep.json"));
    let row = &t["table"]["rows"][0];
    for key in ["rho_diff", "drho_diff"] {
        assert!(row[key].as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)));
    }
}

#[test]
fn incompatible_lattices_exit_one() {
    let mut cfg = hard_sphere(2);
    cfg["sweep"] = json!({ "inner_side": 1.0, "sides": [2.0, 3.0], "spacing": 0.4 });
    assert_eq!(code(&Run::new(&cfg).exec("limit-sweep", "out", &[])), 1);
}
