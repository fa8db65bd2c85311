use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::TcpListener;

use eprsim_core::bell::{chsh, chsh_scan, lhv_correlation, ChshResult, ChshSetting, LhvDistribution, LhvModel};
use eprsim_core::correlations::{
    coincidence_disentangled_planar, coincidence_entangled, corr_disentangled_planar, corr_entangled,
    detection_report, ensemble_corr_isotropic, pair_product_fixed_axis, MeasurementSetting, TableNorm,
    CHANNEL_SCALE,
};
use eprsim_core::ensemble::{
    axis_average, count_events, expected_correlation, generate_range, run_counts, thin_events, CoincidenceCounts,
    Model, PairEvent, RunConfig, Sampler,
};
use eprsim_core::net::{
    run_collector, run_detector, run_source, CollectorConfig, CollectorReport, DetectorConfig, RetryPolicy,
    SourceConfig,
};
use eprsim_core::states::{rho_disentangled, rho_epr};
use eprsim_core::{Direction, Normalization};

use crate::args::*;
use crate::output::{open_sink, Format, RecordWriter, Value};

#[derive(Debug)]
pub enum CmdError {
    Usage(Vec<String>),
    Runtime(String),
}

impl<E: std::fmt::Display> From<E> for CmdError {
    fn from(e: E) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

type CmdResult = Result<(), CmdError>;

fn usage(p: Problems) -> CmdResult {
    if p.is_empty() {
        Ok(())
    } else {
        Err(CmdError::Usage(p.0))
    }
}

fn writer(o: &OutputArgs, columns: &[&str]) -> Result<RecordWriter, CmdError> {
    Ok(RecordWriter::new(open_sink(o.out.as_deref())?, o.format, columns)?)
}

fn table_norm(n: NormArg) -> TableNorm {
    match n {
        NormArg::Raw => TableNorm::Raw,
        NormArg::PerPairs => TableNorm::PerPairs,
    }
}

pub fn analytic(a: &AnalyticArgs) -> CmdResult {
    let mut p = Problems::default();
    if !(a.step > 0.0 && a.step.is_finite()) {
        p.push("--step", "must be positive");
    }
    if !(a.from.is_finite() && a.to.is_finite()) || a.to < a.from {
        p.push("--to", "must be finite and not below --from");
    }
    usage(p)?;
    let norm = table_norm(a.normalization);
    let mut cols = vec!["theta_ab_deg", "e_entangled", "e_disentangled_raw", "e_disentangled_per_pairs"];
    let ent = matches!(a.model, TableSel::Entangled | TableSel::Both);
    let dis = matches!(a.model, TableSel::Disentangled | TableSel::Both);
    if ent {
        cols.extend(["ent_pp", "ent_pm", "ent_mp", "ent_mm"]);
    }
    if dis {
        cols.extend(["dis_pp", "dis_pm", "dis_mp", "dis_mm"]);
    }
    let mut w = writer(&a.output, &cols)?;
    let n = ((a.to - a.from) / a.step + 1e-9).floor() as u64 + 1;
    for i in 0..n {
        let deg = a.from + i as f64 * a.step;
        let s = MeasurementSetting::planar(deg.to_radians());
        let mut row: Vec<Value> = vec![
            deg.into(),
            corr_entangled(&s).into(),
            corr_disentangled_planar(&s, TableNorm::Raw)?.into(),
            corr_disentangled_planar(&s, TableNorm::PerPairs)?.into(),
        ];
        if ent {
            row.extend(coincidence_entangled(&s).entries().map(Value::from));
        }
        if dis {
            row.extend(coincidence_disentangled_planar(&s, norm)?.entries().map(Value::from));
        }
        w.write(&row)?;
    }
    Ok(w.finish()?)
}

const EVENT_CHUNK: u64 = 1 << 16;

fn settings_from(a: &SimulateArgs, p: &mut Problems) -> Option<MeasurementSetting> {
    if let Some(t) = a.theta_ab {
        if !t.is_finite() {
            p.push("--theta-ab", "must be finite");
            return None;
        }
        return Some(MeasurementSetting::planar(t.to_radians()));
    }
    match (&a.setting_a, &a.setting_b) {
        (None, None) => Some(MeasurementSetting::planar(0.0)),
        (Some(x), Some(y)) => {
            let sa = p.check("--setting-a", parse_direction(x));
            let sb = p.check("--setting-b", parse_direction(y));
            Some(MeasurementSetting::new(sa?, sb?))
        }
        _ => {
            p.push("--setting-a/--setting-b", "give both or neither");
            None
        }
    }
}

fn event_columns(detector_view: bool) -> Vec<&'static str> {
    let mut c = vec!["pair_id"];
    if !detector_view {
        c.extend(["axis_x", "axis_y", "axis_z", "branch"]);
    }
    c.extend(["a_theta_deg", "b_theta_deg", "outcome_a", "outcome_b", "a_phi_deg", "b_phi_deg"]);
    c
}

fn event_row(e: &PairEvent, detector_view: bool) -> Vec<Value> {
    let mut r: Vec<Value> = vec![e.pair_id.into()];
    if !detector_view {
        match e.axis {
            Some(ax) => r.extend(ax.components().map(Value::from)),
            None => r.extend([Value::Null, Value::Null, Value::Null]),
        }
        r.push(e.branch.map(|b| b.as_i8()).into());
    }
    r.extend([
        e.setting_a.polar_angle().to_degrees().into(),
        e.setting_b.polar_angle().to_degrees().into(),
        e.outcome_a.as_i8().into(),
        e.outcome_b.as_i8().into(),
        e.setting_a.azimuth().to_degrees().into(),
        e.setting_b.azimuth().to_degrees().into(),
    ]);
    r
}

const SUMMARY_COLUMNS: [&str; 16] = [
    "model",
    "sampler",
    "seed",
    "pairs_generated",
    "pairs_used",
    "theta_ab_deg",
    "correlation",
    "std_error",
    "expected",
    "z_score",
    "within_3sigma",
    "n_pp",
    "n_pm",
    "n_mp",
    "n_mm",
    "thin",
];

fn summary_row(cfg: &RunConfig, counts: &CoincidenceCounts, thin: Option<f64>) -> Vec<Value> {
    let expected = expected_correlation(cfg.model, &cfg.sampler, &cfg.settings);
    let est = counts.correlation().ok();
    let model = match cfg.model {
        Model::Entangled => "entangled",
        Model::Disentangled => "disentangled",
    };
    vec![
        model.into(),
        sampler_name(&cfg.sampler).into(),
        cfg.seed.into(),
        cfg.n_pairs.into(),
        counts.n().into(),
        cfg.settings.theta_ab().to_degrees().into(),
        est.map(|e| e.value).into(),
        est.map(|e| e.std_error).into(),
        expected.into(),
        est.map(|e| e.z_score(expected)).into(),
        est.map(|e| e.within(expected, 3.0)).into(),
        counts.pp.into(),
        counts.pm.into(),
        counts.mp.into(),
        counts.mm.into(),
        thin.into(),
    ]
}

pub fn simulate(a: &SimulateArgs) -> CmdResult {
    let mut p = Problems::default();
    if a.pairs == 0 {
        p.push("--pairs", "must be at least 1");
    }
    let sampler = p.check("--sampler", parse_sampler(&a.sampler));
    let settings = settings_from(a, &mut p);
    if let Some(t) = a.thin {
        if !(0.0..=1.0).contains(&t) {
            p.push("--thin", "must be in [0, 1]");
        }
    }
    let (Some(sampler), Some(settings)) = (sampler, settings) else {
        return usage(p);
    };
    usage(p)?;
    let cfg = RunConfig { n_pairs: a.pairs, seed: a.seed, model: a.model.into(), sampler, settings };

    if a.summary_only && a.thin.is_none() {
        let counts = run_counts(&cfg)?;
        let mut w = writer(&a.output, &SUMMARY_COLUMNS)?;
        w.write(&summary_row(&cfg, &counts, None))?;
        return Ok(w.finish()?);
    }

    let mut events_out = if a.summary_only { None } else { Some(writer(&a.output, &event_columns(a.detector_view))?) };
    let mut counts = CoincidenceCounts::default();
    let mut start = 0;
    while start < cfg.n_pairs {
        let end = (start + EVENT_CHUNK).min(cfg.n_pairs);
        let mut chunk = generate_range(&cfg, start..end);
        if let Some(t) = a.thin {
            chunk = thin_events(&chunk, t, cfg.seed)?;
        }
        counts = counts.merge(count_events(&chunk));
        if let Some(w) = events_out.as_mut() {
            for e in &chunk {
                w.write(&event_row(e, a.detector_view))?;
            }
        }
        start = end;
    }
    match events_out {
        Some(w) => {
            w.finish()?;
            let mut s = RecordWriter::new(Box::new(io::stderr()), Format::Jsonl, &SUMMARY_COLUMNS)?;
            s.write(&summary_row(&cfg, &counts, a.thin))?;
            s.finish()?;
        }
        None => {
            let mut w = writer(&a.output, &SUMMARY_COLUMNS)?;
            w.write(&summary_row(&cfg, &counts, a.thin))?;
            w.finish()?;
        }
    }
    Ok(())
}

fn deg(d: &Direction) -> f64 {
    d.azimuth().to_degrees().rem_euclid(360.0)
}

pub fn chsh_cmd(a: &ChshArgs) -> CmdResult {
    let mut p = Problems::default();
    let angles = match &a.angles {
        Some(s) => p.check("--angles", parse_angles(s)),
        None => Some([0.0, 90.0, 45.0, 135.0]),
    };
    if let Some(r) = a.scan {
        if r < 4 {
            p.push("--scan", "resolution must be at least 4");
        }
    }
    usage(p)?;
    let norm = table_norm(a.normalization);
    let lhv = LhvModel::spin_expectation(LhvDistribution::DeltaPaired);
    let e = |x: &Direction, y: &Direction| -> f64 {
        let s = MeasurementSetting::new(*x, *y);
        match a.model {
            ChshModel::Entangled => corr_entangled(&s),
            // settings are planar by construction here
            ChshModel::Disentangled => corr_disentangled_planar(&s, norm).expect("planar settings"),
            ChshModel::Lhv => lhv_correlation(&lhv, &s).expect("smooth responses converge"),
        }
    };
    let (mode, setting, res): (&str, ChshSetting, ChshResult) = match a.scan {
        Some(r) => {
            let scan = chsh_scan(e, r)?;
            ("scan", scan.setting, scan.result)
        }
        None => {
            let [x, xp, y, yp] = angles.expect("validated");
            let s = ChshSetting::planar(x.to_radians(), xp.to_radians(), y.to_radians(), yp.to_radians());
            ("fixed", s, chsh(e, &s))
        }
    };
    let model = match a.model {
        ChshModel::Entangled => "entangled",
        ChshModel::Disentangled => "disentangled",
        ChshModel::Lhv => "lhv",
    };
    let mut w = writer(
        &a.output,
        &[
            "mode", "model", "normalization", "resolution", "a_deg", "a_prime_deg", "b_deg", "b_prime_deg", "e_ab",
            "e_ab_prime", "e_a_prime_b", "e_a_prime_b_prime", "s_value", "abs_s",
        ],
    )?;
    w.write(&[
        mode.into(),
        model.into(),
        if a.model == ChshModel::Disentangled { Value::from(norm.as_str()) } else { Value::Null },
        a.scan.map(|r| r as u64).into(),
        deg(&setting.a).into(),
        deg(&setting.a_prime).into(),
        deg(&setting.b).into(),
        deg(&setting.b_prime).into(),
        res.e_ab.into(),
        res.e_ab_prime.into(),
        res.e_a_prime_b.into(),
        res.e_a_prime_b_prime.into(),
        res.s_value.into(),
        res.s_value.abs().into(),
    ])?;
    Ok(w.finish()?)
}

fn bind_and_announce(addr: &str) -> Result<TcpListener, CmdError> {
    let l = TcpListener::bind(addr).map_err(|e| CmdError::Runtime(format!("bind {addr}: {e}")))?;
    let mut out = io::stdout().lock();
    writeln!(out, "{}", l.local_addr()?)?;
    out.flush()?;
    Ok(l)
}

fn print_json_line(columns: &[&str], values: &[Value]) -> CmdResult {
    let mut w = RecordWriter::new(Box::new(io::stdout()), Format::Jsonl, columns)?;
    w.write(values)?;
    Ok(w.finish()?)
}

pub fn net_source(a: &NetSourceArgs) -> CmdResult {
    let mut p = Problems::default();
    if a.connect.len() != 2 {
        p.push("--connect", format!("give exactly two endpoints (A then B), got {}", a.connect.len()));
    }
    let sampler = p.check("--sampler", parse_sampler(&a.sampler));
    usage(p)?;
    let cfg = SourceConfig {
        n_pairs: a.pairs,
        seed: a.seed,
        sampler: sampler.expect("validated"),
        endpoint_a: a.connect[0].clone(),
        endpoint_b: a.connect[1].clone(),
        retry: RetryPolicy::default(),
    };
    let rep = run_source(&cfg)?;
    print_json_line(&["sent_a", "sent_b"], &[rep.sent_a.into(), rep.sent_b.into()])
}

pub fn net_detector(a: &NetDetectorArgs) -> CmdResult {
    let mut p = Problems::default();
    let setting = p.check("--setting", parse_direction(&a.setting));
    usage(p)?;
    let cfg = DetectorConfig { wing: a.wing.into(), setting: setting.expect("validated"), seed: a.seed };
    let listener = bind_and_announce(&a.listen)?;
    let mut capture = match &a.capture {
        Some(path) => Some(BufWriter::new(File::create(path)?)),
        None => None,
    };
    let rep = run_detector(
        &cfg,
        &listener,
        &a.connect,
        &RetryPolicy::default(),
        capture.as_mut().map(|c| c as &mut dyn Write),
    )?;
    if let Some(mut c) = capture {
        c.flush()?;
    }
    print_json_line(
        &["wing", "received", "malformed", "forwarded"],
        &[(cfg.wing.as_byte() as char).to_string().into(), rep.received.into(), rep.malformed.into(), rep.forwarded.into()],
    )
}

pub const COLLECTOR_COLUMNS: [&str; 18] = [
    "received_a",
    "received_b",
    "n_matched",
    "n_orphaned",
    "n_duplicates",
    "n_malformed",
    "n_missing",
    "n_pp",
    "n_pm",
    "n_mp",
    "n_mm",
    "p_pp",
    "p_pm",
    "p_mp",
    "p_mm",
    "correlation",
    "std_error",
    "stream_errors",
];

fn collector_row(r: &CollectorReport) -> Vec<Value> {
    let mut v: Vec<Value> = vec![
        r.received_a.into(),
        r.received_b.into(),
        r.n_matched.into(),
        r.n_orphaned.into(),
        r.n_duplicates.into(),
        r.n_malformed.into(),
        r.n_missing.into(),
        r.counts.pp.into(),
        r.counts.pm.into(),
        r.counts.mp.into(),
        r.counts.mm.into(),
    ];
    v.extend(r.table.entries().map(Value::from));
    v.push(r.estimate.map(|e| e.value).into());
    v.push(r.estimate.map(|e| e.std_error).into());
    v.push(r.stream_errors.join("; ").into());
    v
}

pub fn net_collector(a: &NetCollectorArgs) -> CmdResult {
    let mut p = Problems::default();
    if a.capacity == 0 {
        p.push("--capacity", "must be at least 1");
    }
    usage(p)?;
    let listener = bind_and_announce(&a.listen)?;
    let cfg = CollectorConfig { expected_pairs: a.pairs, capacity: a.capacity, mismatch: a.mismatch };
    let rep = run_collector(&listener, cfg)?;
    let mut w = writer(&a.output, &COLLECTOR_COLUMNS)?;
    w.write(&collector_row(&rep))?;
    Ok(w.finish()?)
}

pub fn report(a: &ReportArgs) -> CmdResult {
    let mut w = writer(&a.output, &["quantity", "value", "reference", "abs_diff", "note"])?;
    let mut row = |name: &str, value: f64, reference: Option<f64>, note: &str| -> io::Result<()> {
        w.write(&[
            name.into(),
            value.into(),
            reference.into(),
            reference.map(|r| (value - r).abs()).into(),
            if note.is_empty() { Value::Null } else { note.into() },
        ])
    };
    let at = |deg: f64| MeasurementSetting::planar(deg.to_radians());
    let z = MeasurementSetting::new(Direction::Z, Direction::Z);

    row("corr_entangled(0)", corr_entangled(&at(0.0)), Some(-1.0), "")?;
    row("corr_entangled(45)", corr_entangled(&at(45.0)), Some(-(0.5f64).sqrt()), "")?;
    row("pair_product_fixed_axis(a=b=axis)", pair_product_fixed_axis(&z, &Direction::Z), Some(-0.25), "")?;
    row("ensemble_corr_isotropic(0)", ensemble_corr_isotropic(&at(0.0)), Some(-1.0 / 12.0), "")?;
    row("corr_disentangled_planar_raw(0)", corr_disentangled_planar(&at(0.0), TableNorm::Raw)?, Some(-0.125), "")?;
    row(
        "corr_disentangled_planar_per_pairs(0)",
        corr_disentangled_planar(&at(0.0), TableNorm::PerPairs)?,
        Some(-0.5),
        "",
    )?;
    row(
        "planar_per_pairs_table_sum(37)",
        coincidence_disentangled_planar(&at(37.0), TableNorm::PerPairs)?.sum(),
        Some(1.0),
        "",
    )?;
    let det = detection_report(&at(0.0))?;
    row("planar_raw_table_sum", det.raw_sum, Some(0.25), "")?;
    row("per_channel_scale", det.per_channel_scale, Some(CHANNEL_SCALE), &det.notes.join(" | "))?;

    let e_ent = |x: &Direction, y: &Direction| corr_entangled(&MeasurementSetting::new(*x, *y));
    let e_dis =
        |x: &Direction, y: &Direction| corr_disentangled_planar(&MeasurementSetting::new(*x, *y), TableNorm::PerPairs).unwrap();
    let std = ChshSetting::standard();
    row("chsh_entangled_standard_abs_s", chsh(e_ent, &std).s_value.abs(), Some(2.0 * 2f64.sqrt()), "")?;
    row("chsh_disentangled_per_pairs_abs_s", chsh(e_dis, &std).s_value.abs(), Some(2f64.sqrt()), "")?;
    row("chsh_entangled_scan360_abs_s", chsh_scan(e_ent, 360)?.result.s_value.abs(), Some(2.0 * 2f64.sqrt()), "")?;
    let lhv = LhvModel::spin_expectation(LhvDistribution::DeltaPaired);
    row("lhv_delta_paired(0)", lhv_correlation(&lhv, &at(0.0))?, Some(-1.0 / 3.0), "")?;
    let indep = LhvModel::spin_expectation(LhvDistribution::IndependentIsotropic);
    row("lhv_independent(0)", lhv_correlation(&indep, &at(0.0))?, Some(0.0), "")?;
    row("purity_rho_epr", rho_epr().rho().purity(), Some(1.0), "")?;
    row("purity_disentangled_unit_trace", rho_disentangled(&Direction::Z, Normalization::UnitTrace).rho().purity(), Some(0.5), "")?;

    if a.pairs > 0 {
        let s45 = at(45.0);
        let mc = |model: Model, sampler: Sampler, s: MeasurementSetting| -> Result<(f64, f64), CmdError> {
            let cfg = RunConfig { n_pairs: a.pairs, seed: a.seed, model, sampler, settings: s };
            let e = run_counts(&cfg)?.correlation()?;
            Ok((e.value, e.std_error))
        };
        let (v, se) = mc(Model::Entangled, Sampler::Isotropic, s45)?;
        row("mc_entangled(45)", v, Some(corr_entangled(&s45)), &format!("std_error {se:.3e}"))?;
        let (v, se) = mc(Model::Disentangled, Sampler::Isotropic, s45)?;
        let want = expected_correlation(Model::Disentangled, &Sampler::Isotropic, &s45);
        row("mc_disentangled_isotropic(45)", v, Some(want), &format!("std_error {se:.3e}; outcome level, 4x the 1/12 form"))?;
        let (v, se) = mc(Model::Disentangled, Sampler::PlanarXY, s45)?;
        let want = expected_correlation(Model::Disentangled, &Sampler::PlanarXY, &s45);
        row("mc_disentangled_planar(45)", v, Some(want), &format!("std_error {se:.3e}"))?;
        let (a_s, b_s) = (s45.a, s45.b);
        let avg = axis_average(&Sampler::Isotropic, a.seed, a.pairs, |p| -0.25 * a_s.dot(p) * b_s.dot(p))?;
        row(
            "sphere_average_pair_product(45)",
            avg.value,
            Some(ensemble_corr_isotropic(&s45)),
            &format!("std_error {:.3e}", avg.std_error),
        )?;
    }
    Ok(w.finish()?)
}
