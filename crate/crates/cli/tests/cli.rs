use std::path::Path;
use std::process::{Command, Output};

fn sheetcap(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sheetcap"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("SHEETCAP_THREADS", "1")
        .output()
        .unwrap()
}

#[test]
fn capacity_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cap");
    let o = sheetcap(&["capacity", "--d", "3", "--set", "ball:0,0,0:1", "--beta", "1", "--resolutions", "6"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("capacity.csv")).unwrap();
    assert!(csv.starts_with("set,beta,resolution,points,cell_size,value,energy,duality_gap,iterations,converged\n"));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    for key in ["command", "config", "seed", "versions", "threads", "wall_time_s", "outputs"] {
        assert!(manifest.get(key).is_some(), "manifest lacks {key}");
    }
    assert_eq!(manifest["threads"], 1);
    assert_eq!(manifest["config"]["beta"], 1.0);
}

#[test]
fn config_errors_exit_2_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "d = 3\nno_such_key = 1\n").unwrap();
    let out = dir.path().join("bad");
    let o = sheetcap(&["capacity", "--config", cfg.to_str().unwrap(), "--set", "ball:0,0,0:1"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let o = sheetcap(&["hitprob", "--d", "3", "--set", "ball:0,0:1"], &out);
    assert_eq!(o.status.code(), Some(2));
    let o = sheetcap(&["scaling", "--margin-policy", "nope"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "d = 3\nset = [\"ball:0,0,0:1\"]\nbeta = 2.0\nresolutions = [6]\n").unwrap();
    let out = dir.path().join("o");
    let o = sheetcap(&["capacity", "--config", cfg.to_str().unwrap(), "--beta", "1"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("capacity.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains(",1,6,"));
}

#[test]
fn strict_polarity_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let args = [
        "sandwich", "--d", "5", "--set", "ball:0,0,0,0,0:0.2", "--set", "point:0,0,0,0,0", "--resolutions", "6",
        "--margin-policy", "fixed", "--margin", "0.5", "--n", "300",
    ];
    let o = sheetcap(&args, &out);
    assert_eq!(o.status.code(), Some(0));
    let mut strict = args.to_vec();
    strict.push("--strict");
    let o = sheetcap(&strict, &out);
    assert_eq!(o.status.code(), Some(3));
    let csv = std::fs::read_to_string(out.join("sandwich.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("\"point:0,0,0,0,0\"") && l.contains(",true,")));
}

#[test]
fn dimension_calibrations_pass() {
    let dir = tempfile::tempdir().unwrap();
    for (model, scales) in [("segment", "0.002:0.2:10"), ("square", "0.004:0.1:10")] {
        let out = dir.path().join(model);
        let o = sheetcap(
            &["dimension", "--model", model, "--scales", scales, "--n-points", "200000", "--strict"],
            &out,
        );
        assert!(o.status.success(), "{model}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn simulate_dumps_every_node() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = sheetcap(&["simulate", "--model", "ou", "--d", "2", "--cells", "3", "--n", "2"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("simulate.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "path,node,t0,t1,x0,x1");
    assert!(lines.len() > 2);
}

#[test]
fn plot_facing_headers() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [(&[&str], &[(&str, &str)]); 3] = [
        (
            &["scaling", "--d", "3", "--radii", "0.1:0.4:3", "--n", "200"],
            &[("scaling.csv", "radius,p_hat,hits,n_paths,ci_low,ci_high,retained,margin,slope,slope_stderr,intercept")],
        ),
        (
            &["verify-density", "--model", "spde", "--diffusion", "diagonal", "--rho", "0.5", "--cells", "4", "--n", "20000"],
            &[
                ("density.csv", "report,point,x0,x1,kde,budget,reference,lower_envelope,upper_envelope"),
                ("density_fit.csv", "report,label,scale,c_low,c_up,pass_lower,pass_upper,max_rel_error,n_samples"),
            ],
        ),
        (
            &["dimension", "--model", "segment", "--scales", "0.01:0.2:6", "--n-points", "5000"],
            &[("dimension.csv", "scale,count,fitted,slope,slope_stderr,r_squared,expected")],
        ),
    ];
    for (k, (args, files)) in runs.iter().enumerate() {
        let out = dir.path().join(k.to_string());
        let o = sheetcap(args, &out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        for (name, header) in *files {
            let text = std::fs::read_to_string(out.join(name)).unwrap();
            assert_eq!(text.lines().next().unwrap(), *header);
            assert!(text.lines().count() > 1, "{name} has no rows");
        }
    }
}
