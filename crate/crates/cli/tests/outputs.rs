use std::path::Path;
use std::process::Command;

use cavsim_cli::output::schema;
use cavsim_cli::{run, RunConfig};

fn config(dir: &Path, body: &str) -> RunConfig {
    let text = format!("output_dir = {:?}\nplot = true\n{body}", dir.display().to_string());
    RunConfig::from_toml(&text).unwrap()
}

const SMALL_ENSEMBLE: &str = r#"
[ensemble]
n_trajectories = 3
t_total = 600.0
t_burnin = 100.0
dt = 0.01
sample_interval = 0.1
master_seed = 11
"#;

/// Comment lines and the column header of a CSV file.
fn split(path: &Path) -> (Vec<String>, String, Vec<String>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut comments = Vec::new();
    let mut lines = text.lines();
    let header = loop {
        let l = lines.next().expect("file has a header row");
        if let Some(c) = l.strip_prefix('#') {
            comments.push(c.to_string());
        } else {
            break l.to_string();
        }
    };
    (comments, header, lines.map(str::to_string).collect())
}

fn assert_schema(path: &Path, expected: &str) {
    let (_, header, _) = split(path);
    assert_eq!(header, expected, "{}", path.display());
}

#[test]
fn golden_headers() {
    let golden = [
        (schema::SINGLE_RUN, "kappa,eta,T,T_err,T_uK,n_mean,n_err,T_over_potential,psd_violation_rate,stationary,aborted,ks_distance,ks_critical_99"),
        (schema::WINDOWS, "window,t_start,t_end,T,T_err"),
        (schema::POSITION, "x,density,thermal_density"),
        (schema::SWEEP_KAPPA, "kappa,eta,T,T_err,n_mean,T_over_potential,psd_violation_rate,stationary,error"),
        (schema::SWEEP_ETA, "eta,T,T_err,n_mean,ratio,psd_violation_rate,stationary,error"),
        (schema::POSITIONS_ETA, "eta,x,density,thermal_density"),
        (schema::ESCAPE_SUMMARY, "kappa,eta,escaped,censored,T_trap_us,T_trap_err_us,T_trap_mle_us,tau_min_us,r_squared,events_in_tail,bins_used,onset_ratio,error"),
        (schema::TAU_HISTOGRAM, "kappa,eta,tau_lo_us,tau_hi_us,tau_us,count,density_per_us"),
        (schema::FLIGHT_SUMMARY, "kappa,eta,observed_us,flights,T,T_err,n_mean,depth,above_barrier_fraction,first_max_us,minimum_us,second_max_us,cutoff_us,untrapped_fraction,trapped_fraction,T_trap_us,T_trap_err_us,T_trap_mle_us,r_squared,events_in_tail,psd_violation_rate,error"),
        (schema::BASELINE_SUMMARY, "k_bt,photons,depth,above_barrier_fraction,moving_fraction,flights,shortest_flight_us"),
    ];
    for (cols, line) in golden {
        assert_eq!(cols.join(","), line);
    }
}

#[test]
fn single_run_embeds_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &format!("experiment = \"single-run\"\n{SMALL_ENSEMBLE}"));
    let files = run(&cfg).unwrap();
    for name in ["summary.csv", "windows.csv", "position.csv", "position.svg"] {
        assert!(files.contains(&dir.path().join(name)), "{name} missing");
    }
    let (comments, header, rows) = split(&dir.path().join("summary.csv"));
    assert_eq!(header, schema::SINGLE_RUN.join(","));
    assert!(comments.iter().any(|c| c.trim() == "master_seed = 11"));
    // the embedded TOML reproduces the configuration
    let embedded: String = comments
        .iter()
        .skip_while(|c| !c.contains("resolved configuration"))
        .skip(1)
        .map(|c| format!("{}\n", c.trim_start_matches("   ")))
        .collect();
    assert_eq!(RunConfig::from_toml(&embedded).unwrap(), cfg);
    assert_eq!(rows.len(), 1);
    assert_schema(&dir.path().join("windows.csv"), &schema::WINDOWS.join(","));
    assert_schema(&dir.path().join("position.csv"), &schema::POSITION.join(","));
}

#[test]
fn kappa_sweep_of_one_point_matches_single_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sweep = config(
        a.path(),
        &format!("experiment = \"sweep-kappa\"\n[system]\ng = 2.5\ndelta_a = 20.0\ndelta_c = 0.0\nkappa = 0.5\neta = 1.0\n{SMALL_ENSEMBLE}\n[sweep]\nkappa = [0.5]\neta_over_kappa = 2.0\n"),
    );
    run(&sweep).unwrap();
    run(&config(b.path(), &format!("experiment = \"single-run\"\n{SMALL_ENSEMBLE}"))).unwrap();
    let (_, _, s) = split(&a.path().join("sweep_kappa.csv"));
    let (_, _, r) = split(&b.path().join("summary.csv"));
    let s: Vec<&str> = s[0].split(',').collect();
    let r: Vec<&str> = r[0].split(',').collect();
    // T, T_err and n_mean
    assert_eq!((s[2], s[3], s[4]), (r[2], r[3], r[5]));
}

#[test]
fn failing_sweep_point_is_recorded_and_the_rest_runs() {
    let dir = tempfile::tempdir().unwrap();
    // the first point has no photons, so the ground-state start is undefined
    let cfg = config(dir.path(), &format!("experiment = \"sweep-eta\"\n{SMALL_ENSEMBLE}\n[sweep]\neta = [0.0, 1.0]\n"));
    run(&cfg).unwrap();
    let (_, _, rows) = split(&dir.path().join("sweep_eta.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains("photons"), "{}", rows[0]);
    assert!(rows[1].ends_with(','), "{}", rows[1]);
    let (_, header, pos) = split(&dir.path().join("positions_eta.csv"));
    assert_eq!(header, schema::POSITIONS_ETA.join(","));
    assert_eq!(pos.len(), 64);
}

#[test]
fn escape_run_reports_refused_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "experiment = \"escape-times\"\n[ensemble]\nn_trajectories = 4\nt_total = 3000.0\nt_burnin = 0.0\ndt = 0.01\nmaster_seed = 2\n",
    );
    run(&cfg).unwrap();
    let (_, _, rows) = split(&dir.path().join("escape_summary.csv"));
    assert_eq!(rows.len(), 1);
    assert!(rows[0].contains("fit refused"), "{}", rows[0]);
    let (_, header, hist) = split(&dir.path().join("escape_hist.csv"));
    assert_eq!(header, schema::TAU_HISTOGRAM.join(","));
    assert_eq!(hist.len(), 60);
}

#[test]
fn escape_sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "experiment = \"escape-times\"\n[ensemble]\nn_trajectories = 2\nt_total = 500.0\nt_burnin = 0.0\ndt = 0.01\n[sweep]\neta = [1.0, 1.5]\n",
    );
    run(&cfg).unwrap();
    let (_, _, rows) = split(&dir.path().join("escape_summary.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("0.5,1.5,"));
}

#[test]
fn flight_and_baseline_runs_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "experiment = \"flight-times\"\n[ensemble]\nn_trajectories = 1\nt_total = 20000.0\nt_burnin = 1000.0\ndt = 0.01\n");
    run(&cfg).unwrap();
    let (_, _, rows) = split(&dir.path().join("flight_summary.csv"));
    assert_eq!(rows[0].split(',').count(), schema::FLIGHT_SUMMARY.len());
    assert!(dir.path().join("flight_short_hist.csv").exists());

    let cfg = config(
        dir.path(),
        "experiment = \"baseline\"\n[ensemble]\nn_trajectories = 1\nt_total = 600.0\n[baseline]\nk_bt = 0.7\nphotons = 3.7\nn_atoms = 50\nt_observe = 300.0\n",
    );
    run(&cfg).unwrap();
    let (_, _, rows) = split(&dir.path().join("baseline_summary.csv"));
    let fields: Vec<&str> = rows[0].split(',').collect();
    let above: f64 = fields[3].parse().unwrap();
    assert!(above > 0.1 && above < 0.35, "{above}");
}

fn cavsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cavsim")).args(args).output().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let good = dir.path().join("good.toml");
    std::fs::write(&good, format!("experiment = \"single-run\"\n{SMALL_ENSEMBLE}")).unwrap();
    let o = cavsim(&["--config", good.to_str().unwrap(), "--seed", "5", "--workers", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (comments, _, _) = split(&out.join("summary.csv"));
    assert!(comments.iter().any(|c| c.trim() == "master_seed = 5"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "experiment = \"single-run\"\n[ensemble]\nn_trajectories = 3\nt_total = -1.0\n").unwrap();
    assert_eq!(cavsim(&["--config", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(cavsim(&["--config", "/nonexistent.toml"]).status.code(), Some(1));

    // an atom too fast for the sampling cadence fails at run time; the summary file is left behind
    let failing = dir.path().join("failing.toml");
    let partial = dir.path().join("partial");
    std::fs::write(
        &failing,
        format!("experiment = \"flight-times\"\noutput_dir = {:?}\n[ensemble]\nn_trajectories = 1\nt_total = 2000.0\nt_burnin = 100.0\ndt = 0.01\n[initial]\natom = {{ kind = \"point\", x = 1.0, p = 2000.0 }}\n", partial.display().to_string()),
    )
    .unwrap();
    let o = cavsim(&["--config", failing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(partial.join("flight_summary.csv").exists());
}
