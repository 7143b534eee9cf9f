use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_spde-density");

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SPDE_DENSITY_SEED")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_ADDITIVE: &str = r#"
[model]
kind = "additive"
a = 1.0
b = 1.0
sigma = 1.0
noise = "reciprocal"
truncation = 10
forcing = { mode = 1, signal = "cos" }
g = "sin"
h = "cos"
initial_mean = [0.0]
initial_variance = [0.0625]

[run]
t = [0.5]
x = [0.4]
u = { min = -1.0, max = 2.0, count = 5 }
horizon = 1.0
dt = 0.05
n_paths = 400
oracle_samples = 400
seed = 11

[outputs]
density = "d.csv"
fk = "fk.csv"
oracle = "o.csv"
residual = "r.csv"
ck = "ck.csv"
"#;

const MULTIPLICATIVE_ALPHA3: &str = r#"
[model]
kind = "multiplicative"
a = 1.0
b = 1.0
c = 1.0
alpha = 3.0
epsilon = 0.5
m = 2
initial_log_mean = 1.0
initial_log_variance = 0.25
"#;

#[test]
fn alpha_out_of_range_exits_1_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", MULTIPLICATIVE_ALPHA3);
    let o = run(&["density", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("InvalidParameter(alpha)"), "{msg}");
    assert!(!dir.path().join("density.csv").exists());
}

#[test]
fn empty_and_duplicate_and_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(dir.path(), "empty.toml", "");
    let o = run(&["density", "--config", &empty], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ParseError"));

    let dup = write_config(dir.path(), "dup.toml", &format!("{SMALL_ADDITIVE}\n[model]\nkind = \"kpz\"\n"));
    let o = run(&["density", "--config", &dup], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ParseError"), "{}", stderr(&o));

    let dup_key = write_config(dir.path(), "dupkey.toml", &SMALL_ADDITIVE.replace("a = 1.0\n", "a = 1.0\na = 2.0\n"));
    let o = run(&["density", "--config", &dup_key], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("ParseError") && msg.contains("`a`"), "{msg}");

    let unknown = write_config(dir.path(), "unk.toml", &SMALL_ADDITIVE.replace("sigma = 1.0", "sigma = 1.0\nsigmaa = 2.0"));
    let o = run(&["density", "--config", &unknown], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("UnknownKey(sigmaa)"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["density"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["scenario", "run", "nope"], dir.path()).status.code(), Some(1));
    let missing = dir.path().join("missing.toml");
    assert_eq!(
        run(&["density", "--config", missing.to_str().unwrap()], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(run(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn numerical_failure_exits_2_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_ADDITIVE.replace("seed = 11", "seed = 11\ntail_tol = 1e-12");
    let cfg = write_config(dir.path(), "tail.toml", &text);
    let o = run(&["scenario", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("TailNotCertified"), "{}", stderr(&o));
    let csvs = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 0);
}

#[test]
fn scenario_list_names_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["scenario", "list"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let names = String::from_utf8(o.stdout).unwrap();
    assert_eq!(names, "example1\nexample3-multiplicative\nexample4-kpz\n");
}

#[test]
fn outputs_are_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", SMALL_ADDITIVE);
    let outs: Vec<_> = [("1", None), ("3", None), ("2", Some("12"))]
        .iter()
        .enumerate()
        .map(|(i, (threads, seed))| {
            let out = dir.path().join(format!("run{i}"));
            let mut args = vec!["scenario", "--config", &cfg, "--threads", threads];
            if let Some(s) = seed {
                args.extend(["--seed", s]);
            }
            let o = run(&args, &out);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            out
        })
        .collect();
    for name in ["d.csv", "fk.csv", "o.csv", "r.csv", "ck.csv"] {
        let a = std::fs::read(outs[0].join(name)).unwrap();
        let b = std::fs::read(outs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across thread counts");
    }
    assert_ne!(
        std::fs::read(outs[0].join("fk.csv")).unwrap(),
        std::fs::read(outs[2].join("fk.csv")).unwrap()
    );
}

#[test]
fn seed_environment_variable_is_overridden_by_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", SMALL_ADDITIVE);
    let go = |env: Option<&str>, flag: Option<&str>, out: &str| {
        let mut c = Command::new(BIN);
        c.args(["oracle-sample", "--config", &cfg, "--out"]).arg(dir.path().join(out));
        c.env_remove("SPDE_DENSITY_SEED");
        if let Some(e) = env {
            c.env("SPDE_DENSITY_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        assert!(c.output().unwrap().status.success());
        std::fs::read(dir.path().join(out).join("o.csv")).unwrap()
    };
    let env5 = go(Some("5"), None, "e5");
    let flag5 = go(Some("9"), Some("5"), "f5");
    let file = go(None, None, "file");
    let flag11 = go(Some("5"), Some("11"), "f11");
    assert_eq!(env5, flag5);
    assert_eq!(file, flag11);
    assert_ne!(env5, file);
}

#[test]
fn csv_schema_and_exact_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", SMALL_ADDITIVE);
    let o = run(&["scenario", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let headers = [
        ("d.csv", "u,t,x,p_closed"),
        ("fk.csv", "u,t,x,p_closed,p_fk,stderr,n_paths,dt,seed"),
        ("o.csv", "t,x,n,ks,mean_emp,mean_analytic,var_emp,var_analytic"),
        ("r.csv", "du,dt,max_residual,order"),
        ("ck.csv", "s,r,t,max_error"),
    ];
    for (name, header) in headers {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(!text.contains('\r'));
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(header));
        let mut rows = 0;
        for line in lines {
            rows += 1;
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), header.split(',').count());
            for f in fields {
                let v: f64 = f.parse().unwrap_or_else(|_| panic!("{name}: `{f}` is not numeric"));
                if v.is_finite() && f.contains('e') {
                    assert_eq!(format!("{v:.16e}"), f, "{name}: lossy field");
                }
            }
        }
        assert!(rows > 0, "{name} has no rows");
    }
    let density = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert_eq!(density.lines().count(), 6);
}

#[test]
fn multiplicative_listed_grid_is_placed_on_the_support() {
    let dir = tempfile::tempdir().unwrap();
    let text = MULTIPLICATIVE_ALPHA3.replace("alpha = 3.0", "alpha = 0.5")
        + "\n[run]\nt = [0.3]\nx = [0.125, 0.625]\nu = [1.0, 2.0]\n";
    let cfg = write_config(dir.path(), "m.toml", &text);
    let o = run(&["density", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("density.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert_eq!(r[0].signum(), if r[2] < 0.5 { 1.0 } else { -1.0 });
        assert!(r[3] > 0.0);
    }
}
