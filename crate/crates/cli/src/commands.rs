use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use flowcert::bounds::{verify_anytime, BoundKind, VerifyOptions};
use flowcert::flow::flow_sequence;
use flowcert::perturb::tau_bound;
use flowcert::synth::{write_dataset, SynthSpec};
use flowcert::tensor::lp_distance;
use flowcert::vten;
use serde::Serialize;

use crate::args::{read_video, RunArgs};
use crate::report::{self, write_json, Parts, EXIT_COMPLETED};
use crate::{BrightnessArgs, ExtractArgs, ScalingArgs, SynthArgs};

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn synth(a: &SynthArgs) -> Result<u8> {
    let mut spec: SynthSpec = match &a.spec {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => SynthSpec::default(),
    };
    if let Some(n) = a.samples {
        spec.samples = n;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(x) = a.noise {
        spec.noise = x;
    }
    let entries = write_dataset(&spec, &a.out)?;
    println!("wrote {} clips to {}", entries.len(), a.out.display());
    Ok(EXIT_COMPLETED)
}

#[derive(Serialize)]
struct FlowSummary {
    flow: usize,
    mean_u: f64,
    mean_v: f64,
    max_magnitude: f64,
}

pub fn extract_flow(a: &ExtractArgs) -> Result<u8> {
    let video = read_video(&a.video)?;
    let flows = flow_sequence(&video)?;
    vten::write_tensor(&a.out, &flows.to_tensor()).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(path) = &a.report {
        let summary: Vec<FlowSummary> = flows
            .flows()
            .iter()
            .enumerate()
            .map(|(t, f)| {
                let n = f.pixels() as f64;
                let (u, v) = (f.u.values(), f.v.values());
                FlowSummary {
                    flow: t,
                    mean_u: u.iter().sum::<f64>() / n,
                    mean_v: v.iter().sum::<f64>() / n,
                    max_magnitude: u.iter().zip(v).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max),
                }
            })
            .collect();
        write_json(path, &summary)?;
    }
    Ok(EXIT_COMPLETED)
}

#[derive(Clone, Copy, Debug)]
pub enum Mode {
    Both,
    Upper,
    Lower,
}

pub fn verify(a: &RunArgs, mode: Mode) -> Result<u8> {
    let budget = a.budget()?;
    let setup = a.setup()?;
    let opts = VerifyOptions {
        run_upper: !matches!(mode, Mode::Lower),
        run_lower: !matches!(mode, Mode::Upper),
        ..a.options()
    };
    let out = verify_anytime(&setup.game, &budget, &opts, &a.clock())?;
    let csv = out.trace.to_csv();
    if let Some(p) = &a.out {
        fs::write(p, &csv).with_context(|| format!("writing {}", p.display()))?;
    }
    let command = match mode {
        Mode::Both => "verify",
        Mode::Upper => "attack",
        Mode::Lower => "certify",
    };
    let parts = Parts {
        command,
        weights: a.weights.display().to_string(),
        video: a.video.display().to_string(),
        has_upper: true,
        has_lower: opts.run_lower,
    };
    let rep = report::build(parts, &setup, budget, &out)?;
    if let Some(p) = &a.report {
        write_json(p, &rep)?;
    }
    let mut line = format!("{command}: tau {} ", rep.tau);
    if let Some(u) = rep.upper {
        let _ = write!(line, "UB {u} ");
    }
    if let Some(l) = rep.lower {
        let _ = write!(line, "LB {l} ");
    }
    let _ = write!(line, "-> {:?}", rep.outcome);
    if let Some(w) = &rep.witness {
        let _ = write!(line, " (witness of {} moves classified {})", w.instruction.moves(), w.class_name);
    }
    println!("{line}");
    Ok(rep.exit_code)
}

pub const BRIGHTNESS_HEADER: &str =
    "step,delta,input_distance,flow_deviation,class,class_changed,within_lb,within_lipschitz,clamped";

pub fn brightness(a: &BrightnessArgs) -> Result<u8> {
    let r = &a.run;
    let budget = r.budget()?;
    let setup = r.setup()?;
    let game = &setup.game;
    let c = game.config();
    let opts = VerifyOptions { run_upper: false, ..r.options() };
    let lb = verify_anytime(game, &budget, &opts, &r.clock())?.lower;
    let input_width = tau_bound(&c.network, &c.video, c.norm)?.input_width;
    let mut csv = format!("{BRIGHTNESS_HEADER}\n");
    for k in 0..=a.steps {
        let delta = k as f64 * c.tau;
        let clamped = c.video.tensor().values().iter().any(|&x| x + delta > 1.0);
        let bright = c.video.map_clamped(|x| x + delta);
        let dist = lp_distance(c.video.tensor(), bright.tensor(), c.norm)?;
        let flows = flow_sequence(&bright)?;
        let deviation = flows
            .flat_values()
            .iter()
            .zip(c.flows.flat_values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let class = c.network.classify(&bright)?;
        let _ = writeln!(
            csv,
            "{k},{delta},{dist},{deviation},{class},{},{},{},{clamped}",
            class != game.label(),
            dist <= lb,
            dist <= input_width,
        );
    }
    write_text(r.out.as_deref(), &csv)?;
    Ok(EXIT_COMPLETED)
}

pub const SCALING_HEADER: &str = "mask,iteration,wall_ms,kind,value,nodes_expanded";

fn parse_mask(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().with_context(|| format!("bad flow index {x:?} in mask {s:?}")))
        .collect()
}

pub fn scaling(a: &ScalingArgs) -> Result<u8> {
    let r = &a.run;
    let budget = r.budget()?;
    let opts = VerifyOptions { run_upper: false, ..r.options() };
    let mut csv = format!("{SCALING_HEADER}\n");
    for m in &a.masks {
        let mask = parse_mask(m)?;
        ensure!(!mask.is_empty(), "no manipulable flows in mask {m:?}");
        let name = mask.iter().map(usize::to_string).collect::<Vec<_>>().join("+");
        let setup = r.setup_with_flows(Some(mask))?;
        let out = verify_anytime(&setup.game, &budget, &opts, &r.clock())?;
        for e in out.trace.entries.iter().filter(|e| e.kind == BoundKind::Lower) {
            let _ = writeln!(
                csv,
                "{name},{},{},{},{},{}",
                e.iteration,
                e.wall_ms,
                e.kind,
                flowcert::bounds::fmt_g9(e.value),
                e.nodes_expanded
            );
        }
    }
    write_text(r.out.as_deref(), &csv)?;
    Ok(EXIT_COMPLETED)
}
