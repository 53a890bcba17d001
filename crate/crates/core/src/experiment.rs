//! Experiment runner: built-in presets for the three benchmark studies,
//! seeded runs with metric reports, paired comparisons, and CSV/SVG output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nsga2::{self, Nsga2Config};
use crate::optimizer::{self, ParetoArchive, PfopsConfig};
use crate::pareto::{
    default_hypervolume_ref, default_reference_resolution, hypervolume_2d, igd, write_front_csv,
    Front, ReferenceStore,
};
use crate::problems::{lookup_problem, ObjectiveVector};
use crate::scalarize::ScalarizationKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AlgorithmConfig {
    Pfops(PfopsConfig),
    Nsga2(Nsga2Config),
}

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::Pfops(_) => "pfops",
            AlgorithmConfig::Nsga2(_) => "nsga2",
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            AlgorithmConfig::Pfops(c) => AlgorithmConfig::Pfops(PfopsConfig { seed, ..c.clone() }),
            AlgorithmConfig::Nsga2(c) => AlgorithmConfig::Nsga2(Nsga2Config { seed, ..c.clone() }),
        }
    }
}

/// A named, fully specified experiment. Also the schema of run files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPreset {
    pub name: String,
    pub problem: String,
    #[serde(default = "one")]
    pub repeats: usize,
    pub algorithm: AlgorithmConfig,
}

fn one() -> usize {
    1
}

impl ExperimentPreset {
    /// Parses a TOML run file.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let preset: ExperimentPreset = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        preset.validate()?;
        Ok(preset)
    }

    pub fn validate(&self) -> Result<()> {
        let problem = lookup_problem(&self.problem)?;
        if self.repeats == 0 {
            return Err(Error::InvalidConfig(format!(
                "{}: repeats must be positive",
                self.name
            )));
        }
        match &self.algorithm {
            AlgorithmConfig::Pfops(c) => {
                c.validate()?;
                if let (Some(z), Some(ideal)) = (c.utopian, known_ideal_point(&self.problem)) {
                    if !(z.f1() < ideal.f1() && z.f2() < ideal.f2()) {
                        return Err(Error::InvalidConfig(format!(
                            "{}: utopian point ({}, {}) is not strictly below the ideal point \
                             ({}, {}) of `{}`",
                            self.name,
                            z.f1(),
                            z.f2(),
                            ideal.f1(),
                            ideal.f2(),
                            problem.name()
                        )));
                    }
                }
                Ok(())
            }
            AlgorithmConfig::Nsga2(c) => c.validate(),
        }
    }
}

/// Componentwise objective minima of the registered benchmarks.
pub fn known_ideal_point(problem: &str) -> Option<ObjectiveVector> {
    match problem {
        "convex" | "fonseca" => Some(ObjectiveVector::new(0.0, 0.0)),
        // f2 is separable: 3 · min over x of |x|^0.8 + 5 sin(x³), attained near x = −1.1527
        "kursawe" => Some(ObjectiveVector::new(-20.0, -11.627_286)),
        _ => None,
    }
}

fn pfops_preset(
    name: &str,
    problem: &str,
    targets: usize,
    particles: usize,
    metropolis_enabled: bool,
    utopian: Option<(f64, f64)>,
) -> ExperimentPreset {
    ExperimentPreset {
        name: name.into(),
        problem: problem.into(),
        repeats: 10,
        algorithm: AlgorithmConfig::Pfops(PfopsConfig {
            targets,
            particles,
            sigma: 1.0,
            metropolis_enabled,
            final_filter_enabled: true,
            seed: 0,
            scalarization: if utopian.is_some() {
                ScalarizationKind::Tchebycheff
            } else {
                ScalarizationKind::WeightedSum
            },
            utopian: utopian.map(ObjectiveVector::from),
        }),
    }
}

fn nsga2_preset(
    name: &str,
    problem: &str,
    pop_size: usize,
    generations: usize,
) -> ExperimentPreset {
    ExperimentPreset {
        name: name.into(),
        problem: problem.into(),
        repeats: 10,
        algorithm: AlgorithmConfig::Nsga2(Nsga2Config {
            pop_size,
            generations,
            ..Default::default()
        }),
    }
}

/// The shipped presets. "sufficient" is the high-budget regime (also called
/// oversampling), "under" the low-budget one.
pub fn presets() -> Vec<ExperimentPreset> {
    vec![
        pfops_preset("pfops-convex-sufficient", "convex", 100, 100, false, None),
        pfops_preset("pfops-convex-under", "convex", 20, 5, false, None),
        nsga2_preset("nsga2-convex-sufficient", "convex", 100, 100),
        nsga2_preset("nsga2-convex-under", "convex", 20, 5),
        pfops_preset(
            "pfops-fonseca",
            "fonseca",
            200,
            500,
            true,
            Some((-1.0, -1.0)),
        ),
        pfops_preset(
            "pfops-kursawe",
            "kursawe",
            200,
            500,
            true,
            Some((-21.0, -13.0)),
        ),
        nsga2_preset("nsga2-fonseca", "fonseca", 200, 500),
        nsga2_preset("nsga2-kursawe", "kursawe", 200, 500),
    ]
}

pub fn lookup_preset(name: &str) -> Result<ExperimentPreset> {
    let all = presets();
    all.iter()
        .find(|p| p.name == name)
        .cloned()
        .ok_or_else(|| Error::NotFound {
            kind: "preset",
            name: name.to_string(),
            valid: all.into_iter().map(|p| p.name).collect(),
        })
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        f64::deserialize(d).map(Duration::from_secs_f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub preset: String,
    pub problem: String,
    pub seed: u64,
    pub igd: f64,
    pub hypervolume: f64,
    pub eval_count: u64,
    #[serde(rename = "wall_time_secs", with = "secs")]
    pub wall_time: Duration,
    pub metadata: BTreeMap<String, String>,
    pub archive: ParetoArchive,
}

impl RunReport {
    pub fn front(&self) -> Front {
        self.archive.front()
    }

    /// IGD and hypervolume re-derived from the archive.
    pub fn recompute_metrics(&self, store: &ReferenceStore) -> Result<(f64, f64)> {
        score(&self.problem, &self.archive, store)
    }
}

/// IGD against the problem's reference front and hypervolume against its
/// reference point. Only archive points strictly inside the reference box
/// contribute to the hypervolume; an empty archive scores IGD = ∞.
pub fn score(problem: &str, archive: &ParetoArchive, store: &ReferenceStore) -> Result<(f64, f64)> {
    let reference = store.get(problem, default_reference_resolution(problem))?;
    let front = archive.front();
    let igd_value = if front.is_empty() {
        f64::INFINITY
    } else {
        igd(&front, &reference)?
    };
    let r = default_hypervolume_ref(problem);
    let inside: Front = front
        .points()
        .iter()
        .filter(|p| p.f1() < r.f1() && p.f2() < r.f2())
        .copied()
        .collect();
    Ok((igd_value, hypervolume_2d(&inside, r)?))
}

/// Runs `preset` once with `seed` (overriding the preset's own seed).
pub fn run_experiment(
    preset: &ExperimentPreset,
    seed: u64,
    store: &ReferenceStore,
) -> Result<RunReport> {
    preset.validate()?;
    let problem = lookup_problem(&preset.problem)?;
    let algorithm = preset.algorithm.with_seed(seed);

    let start = Instant::now();
    let (archive, eval_count, mut metadata) = match &algorithm {
        AlgorithmConfig::Pfops(cfg) => {
            let out = optimizer::run(cfg, &problem)?;
            let mut meta = cfg.metadata();
            meta.insert("accepted_moves".into(), out.accepted_moves.to_string());
            (out.archive, out.eval_count, meta)
        }
        AlgorithmConfig::Nsga2(cfg) => {
            let out = nsga2::evolve(cfg, &problem)?;
            (out.archive, out.eval_count, cfg.metadata(problem.dim()))
        }
    };
    let wall_time = start.elapsed();

    let (igd_value, hv) = score(&preset.problem, &archive, store)?;
    metadata.insert("preset".into(), preset.name.clone());
    metadata.insert("problem".into(), preset.problem.clone());
    metadata.insert("eval_count".into(), eval_count.to_string());
    metadata.insert(
        "reference_resolution".into(),
        default_reference_resolution(&preset.problem).to_string(),
    );
    let r = default_hypervolume_ref(&preset.problem);
    metadata.insert("hypervolume_ref".into(), format!("{},{}", r.f1(), r.f2()));

    Ok(RunReport {
        preset: preset.name.clone(),
        problem: preset.problem.clone(),
        seed,
        igd: igd_value,
        hypervolume: hv,
        eval_count,
        wall_time,
        metadata,
        archive,
    })
}

/// Runs a built-in preset using the process-wide reference cache.
pub fn run_preset(name: &str, seed: u64) -> Result<RunReport> {
    run_experiment(&lookup_preset(name)?, seed, ReferenceStore::shared())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// One-sided exact sign test: probability of at least `wins` successes in
/// `trials` fair coin flips.
pub fn sign_test_p_value(wins: usize, trials: usize) -> f64 {
    if wins == 0 {
        return 1.0;
    }
    // ln C(n, k) built incrementally
    let mut ln_choose = 0.0f64;
    let mut tail = 0.0;
    for k in 0..=trials {
        if k > 0 {
            ln_choose += ((trials - k + 1) as f64).ln() - (k as f64).ln();
        }
        if k >= wins {
            tail += (ln_choose - trials as f64 * std::f64::consts::LN_2).exp();
        }
    }
    tail.min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub seed: u64,
    pub igd: [f64; 2],
    pub hypervolume: [f64; 2],
    pub eval_count: [u64; 2],
    pub wall_secs: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub presets: [String; 2],
    pub problem: String,
    pub rows: Vec<ComparisonRow>,
    pub reports: Vec<[RunReport; 2]>,
}

impl Comparison {
    fn column(&self, f: impl Fn(&ComparisonRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn median_igd(&self) -> [f64; 2] {
        [0, 1].map(|i| median(&self.column(|r| r.igd[i])))
    }

    pub fn median_hypervolume(&self) -> [f64; 2] {
        [0, 1].map(|i| median(&self.column(|r| r.hypervolume[i])))
    }

    pub fn median_eval_count(&self) -> [f64; 2] {
        [0, 1].map(|i| median(&self.column(|r| r.eval_count[i] as f64)))
    }

    pub fn median_wall_secs(&self) -> [f64; 2] {
        [0, 1].map(|i| median(&self.column(|r| r.wall_secs[i])))
    }

    /// Seeds where the first preset's IGD is strictly lower, and the number
    /// of untied pairs.
    pub fn igd_wins(&self) -> (usize, usize) {
        let wins = self.rows.iter().filter(|r| r.igd[0] < r.igd[1]).count();
        let untied = self.rows.iter().filter(|r| r.igd[0] != r.igd[1]).count();
        (wins, untied)
    }

    /// One-sided sign-test p-value for "first preset has lower IGD".
    pub fn sign_test(&self) -> f64 {
        let (wins, untied) = self.igd_wins();
        sign_test_p_value(wins, untied)
    }

    pub fn summary(&self) -> String {
        let [a, b] = self.median_igd();
        let (wins, untied) = self.igd_wins();
        let verdict = if a < b {
            format!(
                "{} achieved lower median IGD than {}",
                self.presets[0], self.presets[1]
            )
        } else if b < a {
            format!(
                "{} achieved lower median IGD than {}",
                self.presets[1], self.presets[0]
            )
        } else {
            format!(
                "{} and {} tied on median IGD",
                self.presets[0], self.presets[1]
            )
        };
        format!(
            "{verdict} ({a} vs {b}); {} lower on {wins}/{untied} untied seeds, sign-test p = {:.4}",
            self.presets[0],
            self.sign_test()
        )
    }

    pub fn to_csv(&self) -> String {
        let [a, b] = &self.presets;
        let mut out = format!(
            "seed,igd_{a},igd_{b},hypervolume_{a},hypervolume_{b},\
             eval_count_{a},eval_count_{b},wall_secs_{a},wall_secs_{b}\n"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.seed,
                r.igd[0],
                r.igd[1],
                r.hypervolume[0],
                r.hypervolume[1],
                r.eval_count[0],
                r.eval_count[1],
                r.wall_secs[0],
                r.wall_secs[1]
            );
        }
        let (i, h, e, w) = (
            self.median_igd(),
            self.median_hypervolume(),
            self.median_eval_count(),
            self.median_wall_secs(),
        );
        let _ = writeln!(
            out,
            "median,{},{},{},{},{},{},{},{}",
            i[0], i[1], h[0], h[1], e[0], e[1], w[0], w[1]
        );
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_csv())
    }
}

/// Runs both presets once per seed. Seeds are used verbatim for both
/// presets; the runs may execute concurrently but rows come back in seed
/// order.
pub fn compare_presets(
    a: &ExperimentPreset,
    b: &ExperimentPreset,
    seeds: &[u64],
    store: &ReferenceStore,
) -> Result<Comparison> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput(
            "compare needs at least one seed".into(),
        ));
    }
    if a.problem != b.problem {
        return Err(Error::InvalidInput(format!(
            "presets target different problems: {} uses `{}`, {} uses `{}`",
            a.name, a.problem, b.name, b.problem
        )));
    }
    let reports: Vec<[RunReport; 2]> = seeds
        .par_iter()
        .map(|&seed| {
            Ok([
                run_experiment(a, seed, store)?,
                run_experiment(b, seed, store)?,
            ])
        })
        .collect::<Result<_>>()?;
    let rows = reports
        .iter()
        .map(|[ra, rb]| ComparisonRow {
            seed: ra.seed,
            igd: [ra.igd, rb.igd],
            hypervolume: [ra.hypervolume, rb.hypervolume],
            eval_count: [ra.eval_count, rb.eval_count],
            wall_secs: [ra.wall_time.as_secs_f64(), rb.wall_time.as_secs_f64()],
        })
        .collect();
    Ok(Comparison {
        presets: [a.name.clone(), b.name.clone()],
        problem: a.problem.clone(),
        rows,
        reports,
    })
}

pub fn compare(preset_a: &str, preset_b: &str, seeds: &[u64]) -> Result<Comparison> {
    compare_presets(
        &lookup_preset(preset_a)?,
        &lookup_preset(preset_b)?,
        seeds,
        ReferenceStore::shared(),
    )
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `f1,f2` CSV of the report's archive front, sorted ascending by f1.
pub fn emit_front_csv(report: &RunReport, path: &Path) -> Result<()> {
    write_front_csv(&report.front(), path)
}

pub fn emit_report_json(report: &RunReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("reports serialize");
    write_file(path, &json)
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn marker(shape: usize, x: f64, y: f64, color: &str) -> String {
    const R: f64 = 3.5;
    match shape % 4 {
        0 => format!(r#"<circle cx="{x:.2}" cy="{y:.2}" r="{R}" fill="{color}"/>"#),
        1 => format!(
            r#"<rect x="{:.2}" y="{:.2}" width="{}" height="{}" fill="{color}"/>"#,
            x - R,
            y - R,
            2.0 * R,
            2.0 * R
        ),
        2 => format!(
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
            x,
            y - R,
            x - R,
            y + R,
            x + R,
            y + R
        ),
        _ => format!(
            r#"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="{color}" stroke-width="1.5"/>"#,
            x - R,
            y - R,
            x + R,
            y + R,
            x - R,
            y + R,
            x + R,
            y - R
        ),
    }
}

/// Scatter plot of each report's front (one marker group per report) over
/// the reference front (drawn as a polyline when non-empty).
pub fn render_front_svg(reports: &[RunReport], reference: &Front) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::InvalidInput(
            "SVG plot needs at least one report".into(),
        ));
    }
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 50.0;

    let all: Vec<ObjectiveVector> = reports
        .iter()
        .flat_map(|r| r.archive.front_points().iter().copied())
        .chain(reference.points().iter().copied())
        .filter(ObjectiveVector::is_finite)
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold(
        (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ),
        |(a, b, c, d), p| (a.min(p.f1()), b.max(p.f1()), c.min(p.f2()), d.max(p.f2())),
    );
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        (x0, x1) = (x0 - 0.5, x1 + 0.5);
    }
    if y1 - y0 <= 0.0 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let px = |v: f64| LEFT + (v - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |v: f64| H - BOTTOM - (v - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (ax, ay) = (px(x0), py(y0));
    let _ = writeln!(
        svg,
        r#"<g class="axes" stroke="black"><line x1="{ax:.2}" y1="{ay:.2}" x2="{:.2}" y2="{ay:.2}"/><line x1="{ax:.2}" y1="{ay:.2}" x2="{ax:.2}" y2="{:.2}"/></g>"#,
        px(x1),
        py(y1)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">f1</text>"#,
        (px(x0) + px(x1)) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">f2</text>"#,
        (py(y0) + py(y1)) / 2.0,
        (py(y0) + py(y1)) / 2.0
    );
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#,
            px(v),
            H - BOTTOM + 16.0,
            fmt_tick(v)
        );
    }
    for v in [y0, y1] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            py(v) + 4.0,
            fmt_tick(v)
        );
    }

    if !reference.is_empty() {
        let pts: Vec<String> = reference
            .clone()
            .sorted_by_f1()
            .points()
            .iter()
            .filter(|p| p.is_finite())
            .map(|p| format!("{:.2},{:.2}", px(p.f1()), py(p.f2())))
            .collect();
        let _ = writeln!(
            svg,
            r##"<polyline class="reference" fill="none" stroke="#555" stroke-width="1" points="{}"/>"##,
            pts.join(" ")
        );
    }

    for (i, report) in reports.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<g class="markers" data-preset="{}">"#,
            xml_escape(&report.preset)
        );
        for p in report
            .archive
            .front_points()
            .iter()
            .filter(|p| p.is_finite())
        {
            let _ = writeln!(svg, "{}", marker(i, px(p.f1()), py(p.f2()), color));
        }
        let _ = writeln!(svg, "</g>");
    }

    let _ = writeln!(svg, r#"<g class="legend">"#);
    let mut ly = TOP + 10.0;
    let lx = W - RIGHT - 210.0;
    for (i, report) in reports.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(svg, "{}", marker(i, lx, ly, color));
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{} (seed {})</text>"#,
            lx + 10.0,
            ly + 4.0,
            xml_escape(&report.preset),
            report.seed
        );
        ly += 18.0;
    }
    if !reference.is_empty() {
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="#555"/><text x="{:.2}" y="{:.2}">reference front</text>"##,
            lx - 6.0,
            lx + 6.0,
            lx + 10.0,
            ly + 4.0
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn emit_front_svg(reports: &[RunReport], reference: &Front, path: &Path) -> Result<()> {
    write_file(path, &render_front_svg(reports, reference)?)
}
