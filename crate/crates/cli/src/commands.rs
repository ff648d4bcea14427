use std::fmt::Write as _;
use std::path::Path;

use cts::assembly::{self, TangentForm};
use cts::control::{self, Allocation, ControlOptions, ControlProblem, TargetCoordinate};
use cts::dynamics::{self, DynamicsOptions, Sample, TimeHistory};
use cts::io;
use cts::linear;
use cts::model::{self, StructureModel, StructureState};
use cts::scenarios::{self, tbar_elements, LevyParams, ScenarioSpec, TBarSupport};
use cts::schedule::{ActuationSchedule, IndexedTrajectory, Trajectory};
use cts::statics::{self, NewtonOptions};
use log::info;
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::table::{coordinate_name, force_name, rest_length_name, Table};
use crate::{
    AllocationArg, Command, ControlArgs, DynamicArgs, Kind, LevyOptions, LinearizeArgs, ModalArgs,
    Output, PrestressArgs, ScenarioCommand, StaticArgs, Support, SweepCommand,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { structure } => validate(&structure),
        Command::Prestress(args) => prestress(args),
        Command::Static(args) => quasi_static(args),
        Command::Dynamic(args) => dynamic(args),
        Command::Modal(args) => modal(args),
        Command::Linearize(args) => linearize(args),
        Command::Control(args) => control(args),
        Command::Scenario { command } => scenario(command),
        Command::Sweep { command } => sweep(command),
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
pub fn print_stdout(bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(bytes) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Parses and validates a structure file.
fn load(path: &Path) -> Result<StructureModel> {
    let model = io::parse_structure(&read(path)?)?;
    model::validate(&model).into_result()?;
    Ok(model)
}

fn load_schedule(path: Option<&Path>, model: &StructureModel) -> Result<ActuationSchedule> {
    match path {
        Some(p) => Ok(io::parse_schedule(&read(p)?, model)?),
        None => Ok(ActuationSchedule::new()),
    }
}

fn validate(path: &Path) -> Result<()> {
    let model = io::parse_structure(&read(path)?)?;
    let report = model::validate(&model);
    let mut text = report.to_string();
    if report.passed() {
        text.push('\n');
    }
    print_stdout(text.as_bytes())?;
    report.into_result()?;
    Ok(())
}

fn parse_anchor(s: &str) -> Result<(usize, f64)> {
    let bad = || CliError::Usage(format!("anchor must look like element=force, got {s:?}"));
    let (e, f) = s.split_once('=').ok_or_else(bad)?;
    let e: usize = e.trim().parse().map_err(|_| bad())?;
    let f: f64 = f.trim().parse().map_err(|_| bad())?;
    if e == 0 {
        return Err(bad());
    }
    Ok((e - 1, f))
}

fn prestress(args: PrestressArgs) -> Result<()> {
    let mut model = load(&args.structure)?;
    let basis = statics::prestress_modes(&model, &model.nodes)?;
    eprintln!("prestress modes: {}", basis.count());
    let n_ec = model.n_elements();
    if args.anchors.is_empty() {
        let modes = basis.force_modes();
        let mut headers = vec!["element".to_string()];
        headers.extend((1..=basis.count()).map(|k| format!("mode{k}_N")));
        let mut table = Table::new(headers);
        for e in 0..n_ec {
            let mut row = vec![(e + 1) as f64];
            row.extend(modes.row(e).iter());
            table.push(row);
        }
        return table.emit(args.out.as_deref());
    }
    let anchors = args
        .anchors
        .iter()
        .map(|s| parse_anchor(s))
        .collect::<Result<Vec<_>>>()?;
    let t_c = statics::design_prestress(&model, &basis, &anchors)?;
    let rest = statics::rest_lengths_for_forces(&model, &model.nodes, &t_c)?;
    let mut table = Table::new(vec!["element".into(), "t_c_N".into(), "l0_c_m".into()]);
    for e in 0..n_ec {
        table.push(vec![(e + 1) as f64, t_c[e], rest[e]]);
    }
    if let Some(path) = &args.write {
        for (e, el) in model.elements.iter_mut().enumerate() {
            el.rest_length = rest[e];
        }
        write(path, io::write_structure(&model)?)?;
    }
    table.emit(args.out.as_deref())
}

fn state_headers(model: &StructureModel, first: &str) -> Vec<String> {
    let mut h = vec![first.to_string()];
    h.extend((0..model.n_coords()).map(|i| coordinate_name(i, "m")));
    h.extend((0..model.n_elements()).map(force_name));
    h.extend((0..model.n_elements()).map(rest_length_name));
    h
}

fn default_tracks(model: &StructureModel) -> Vec<String> {
    model
        .boundary
        .free()
        .iter()
        .map(|&i| coordinate_name(i, "m"))
        .collect()
}

/// Writes the CSV and, when requested, one SVG per tracked column.
fn finish(table: &Table, output: &Output, default: Vec<String>) -> Result<()> {
    table.emit(output.out.as_deref())?;
    let Some(dir) = &output.plot else {
        return Ok(());
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let x = table.column(&table.headers[0]).unwrap_or_default();
    let tracks = if output.track.is_empty() {
        default
    } else {
        output.track.clone()
    };
    for name in tracks {
        let y = table
            .column(&name)
            .ok_or_else(|| CliError::Usage(format!("no column named {name:?}")))?;
        let svg = crate::svg::line_plot(&x, &y, &table.headers[0], &name);
        write(&dir.join(format!("{name}.svg")), svg)?;
    }
    Ok(())
}

fn quasi_static(args: StaticArgs) -> Result<()> {
    let model = load(&args.structure)?;
    let schedule = load_schedule(args.schedule.as_deref(), &model)?;
    let options = NewtonOptions {
        tolerance: args.tol,
        tangent: args.tangent.into(),
        ..Default::default()
    };
    let state0 = StructureState::reference(&model);
    let path = statics::quasi_static_path(&model, &state0, &schedule, args.substeps, &options)?;
    let mut headers = state_headers(&model, "substep");
    headers.push("residual_N".into());
    headers.push("iterations".into());
    let mut table = Table::new(headers);
    for (k, s) in path.iter().enumerate() {
        let mut row = vec![k as f64];
        row.extend(s.n.iter());
        row.extend(s.t_c.iter());
        row.extend(s.rest_lengths.iter());
        row.push(s.residual);
        row.push(s.iterations as f64);
        table.push(row);
    }
    finish(&table, &args.output, default_tracks(&model))
}

fn history_table(model: &StructureModel, history: &TimeHistory) -> Table {
    let mut headers = state_headers(model, "t_s");
    headers.extend(["kinetic_J", "strain_J", "gravity_J", "total_J"].map(String::from));
    let mut table = Table::new(headers);
    for s in &history.samples {
        table.push(sample_row(s));
    }
    table
}

fn sample_row(s: &Sample) -> Vec<f64> {
    let mut row = vec![s.t];
    row.extend(s.n.iter());
    row.extend(s.t_c.iter());
    row.extend(s.rest_lengths.iter());
    row.extend([
        s.energy.kinetic,
        s.energy.strain,
        s.energy.gravity,
        s.energy.total(),
    ]);
    row
}

fn dynamic(args: DynamicArgs) -> Result<()> {
    let model = load(&args.structure)?;
    let schedule = load_schedule(args.schedule.as_deref(), &model)?;
    let t_end = args.t_end.unwrap_or_else(|| match schedule.end_time() {
        t if t > 0.0 => t,
        _ => 1.0,
    });
    let options = DynamicsOptions {
        dt: args.dt,
        t_end,
        stride: args.stride,
        damping_scale: args.damping,
        skip_stability_check: args.no_stability_check,
    };
    let state0 = StructureState::reference(&model);
    let history = dynamics::integrate(&model, &state0, &schedule, &options)?;
    info!("{} samples", history.samples.len());
    finish(
        &history_table(&model, &history),
        &args.output,
        default_tracks(&model),
    )
}

fn modal(args: ModalArgs) -> Result<()> {
    let model = load(&args.structure)?;
    let state = StructureState::reference(&model);
    let form: TangentForm = args.tangent.into();
    let r = linear::modal(&model, &state, form, args.rigid_threshold)?;
    let hz = r.frequencies_hz();
    let mut text = format!(
        "{:>5} {:>18} {:>14} {:>6}\n",
        "mode", "omega^2 (rad/s)^2", "f (Hz)", "rigid"
    );
    for k in 0..hz.len() {
        writeln!(
            text,
            "{:>5} {:>18.6e} {:>14.6} {:>6}",
            k + 1,
            r.eigenvalues[k],
            hz[k],
            if r.rigid[k] { "yes" } else { "no" }
        )
        .unwrap();
    }
    print_stdout(text.as_bytes())?;
    if let Some(path) = &args.out {
        let mut table = Table::new(
            ["mode", "omega2_rad2_per_s2", "frequency_Hz", "rigid"]
                .map(String::from)
                .to_vec(),
        );
        for k in 0..hz.len() {
            table.push(vec![
                (k + 1) as f64,
                r.eigenvalues[k],
                hz[k],
                r.rigid[k] as u8 as f64,
            ]);
        }
        table.emit(Some(path))?;
    }
    if let Some(path) = &args.shapes {
        let mut headers = vec!["mode".to_string(), "frequency_Hz".to_string()];
        headers.extend(
            model
                .boundary
                .free()
                .iter()
                .map(|&i| coordinate_name(i, "per_sqrt_kg")),
        );
        let mut table = Table::new(headers);
        for k in 0..hz.len() {
            let mut row = vec![(k + 1) as f64, hz[k]];
            row.extend(r.shapes.column(k).iter());
            table.push(row);
        }
        table.emit(Some(path))?;
    }
    if let Some(dir) = &args.dump_matrices {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let set = assembly::assemble(&model, &state, form)?;
        write(&dir.join("K_Taa.txt"), io::write_matrix(&set.aa(&set.k_t)))?;
        write(&dir.join("M_aa.txt"), io::write_matrix(&set.aa(&set.mass)))?;
    }
    Ok(())
}

fn linearize(args: LinearizeArgs) -> Result<()> {
    let model = load(&args.structure)?;
    let state = StructureState::reference(&model);
    let lin = linear::linearize(&model, &state, args.damping, args.tangent.into())?;
    let dir = &args.out;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for (name, m) in [
        ("A.txt", &lin.a),
        ("B.txt", &lin.b),
        ("M_aa.txt", &lin.m_aa),
        ("D_aa.txt", &lin.d_aa),
        ("K_Taa.txt", &lin.k_taa),
    ] {
        write(&dir.join(name), io::write_matrix(m))?;
    }
    eprintln!(
        "state dimension {}, inputs {} (forces on {} coordinates, then {} rest lengths)",
        lin.a.nrows(),
        lin.b.ncols(),
        model.n_coords(),
        model.n_elements()
    );
    Ok(())
}

fn control(args: ControlArgs) -> Result<()> {
    let model = load(&args.structure)?;
    let mut problem = io::parse_targets(&read(&args.targets)?)?;
    if let Some(a) = args.allocation {
        problem.allocation = match a {
            AllocationArg::MinimumNorm => Allocation::MinimumNorm,
            AllocationArg::NearestCurrent => Allocation::NearestCurrent,
        };
    }
    let loads = load_schedule(args.loads.as_deref(), &model)?;
    let options = ControlOptions {
        dt: args.dt,
        t_end: args.t_end,
        stride: args.stride,
        damping_scale: args.damping,
    };
    let state0 = StructureState::reference(&model);
    let out = control::closed_loop_sim(&model, &state0, &problem, &loads, &options)?;

    let coords: Vec<usize> = problem.targets.iter().map(|t| t.coordinate).collect();
    let mut headers = vec!["t_s".to_string()];
    headers.extend(
        coords
            .iter()
            .map(|&i| format!("e_{}", coordinate_name(i, "m"))),
    );
    headers.extend(coords.iter().map(|&i| coordinate_name(i, "m")));
    headers.extend(problem.active.iter().map(|&e| force_name(e)));
    headers.extend(problem.active.iter().map(|&e| rest_length_name(e)));
    headers.push("residual_m_per_s2".into());
    let mut table = Table::new(headers);
    for (sample, record) in out.history.samples.iter().zip(&out.records) {
        let mut row = vec![sample.t];
        row.extend(record.error.iter());
        row.extend(coords.iter().map(|&i| sample.n[i]));
        row.extend(record.t_c_act.iter());
        row.extend(record.rest_lengths.iter());
        row.push(record.residual);
        table.push(row);
    }
    let tracks = coords.iter().map(|&i| coordinate_name(i, "m")).collect();
    finish(&table, &args.output, tracks)
}

fn levy_params(opts: &LevyOptions) -> LevyParams {
    LevyParams {
        complexity: opts.complexity,
        outer_radius: opts.radius,
        deployment_ratio: opts.deployment,
        ..Default::default()
    }
}

/// Control targets used by the generated T-bar: nodes 1 and 3 raised to
/// y = 0.4 m by the upper cable and the two lower strings.
fn tbar_targets() -> ControlProblem {
    let targets = [1, 7]
        .into_iter()
        .map(|coordinate| TargetCoordinate {
            coordinate,
            trajectory: Trajectory::constant(0.4),
        })
        .collect();
    let active = vec![
        tbar_elements::CLUSTER,
        tbar_elements::STRING_5,
        tbar_elements::STRING_6,
    ];
    ControlProblem::critically_damped(targets, 50.0, active)
}

fn scenario(command: ScenarioCommand) -> Result<()> {
    let ScenarioCommand::Gen {
        kind,
        out,
        support,
        levy,
        schedule,
        targets,
    } = command;
    let spec = match kind {
        Kind::Tbar => ScenarioSpec::TBar(match support {
            Support::Pinned => TBarSupport::Pinned,
            Support::Planar => TBarSupport::Planar,
        }),
        Kind::Tower2 => ScenarioSpec::Tower2,
        Kind::Levy => ScenarioSpec::Levy(levy_params(&levy)),
    };
    if targets.is_some() && kind != Kind::Tbar {
        return Err(CliError::Usage(
            "--targets is only available for tbar".into(),
        ));
    }
    let s = scenarios::generate(&spec)?;
    write(&out, io::write_structure(&s.model)?)?;
    if let Some(path) = &schedule {
        write(path, io::write_schedule(&s.schedule)?)?;
    }
    if let Some(path) = &targets {
        write(path, io::write_targets(&tbar_targets())?)?;
    }
    eprintln!(
        "{}: {} nodes, {} elements, {} prestress modes",
        s.name,
        s.model.n_nodes(),
        s.model.n_elements(),
        s.fixtures.prestress_modes
    );
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("CTS_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("CTS_THREADS must be a count, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn sweep(command: SweepCommand) -> Result<()> {
    let pool = thread_pool()?;
    match command {
        SweepCommand::Levy {
            from,
            to,
            steps,
            complexity,
            radius,
            out,
        } => {
            if steps < 2 {
                return Err(CliError::Usage("--steps must be at least 2".into()));
            }
            let ratios: Vec<f64> = (0..steps)
                .map(|k| from + (to - from) * k as f64 / (steps - 1) as f64)
                .collect();
            let rows = pool.install(|| {
                ratios
                    .par_iter()
                    .map(|&c| {
                        levy_case(&LevyOptions {
                            complexity,
                            radius,
                            deployment: c,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let mut table = Table::new(
                [
                    "deployment_ratio",
                    "prestress_modes",
                    "f1_Hz",
                    "min_string_force_N",
                    "max_bar_compression_N",
                ]
                .map(String::from)
                .to_vec(),
            );
            for row in rows {
                table.push(row);
            }
            table.emit(out.as_deref())
        }
        SweepCommand::Speed {
            structure,
            schedule,
            durations,
            dt,
            damping,
            out,
        } => {
            let model = load(&structure)?;
            let schedule = load_schedule(Some(&schedule), &model)?;
            if !(schedule.end_time() > 0.0) {
                return Err(CliError::Usage("schedule has no duration".into()));
            }
            let state0 = StructureState::reference(&model);
            let path = statics::quasi_static_path(
                &model,
                &state0,
                &schedule,
                20,
                &NewtonOptions::default(),
            )?;
            let reference = path.last().expect("nonempty path").n.clone();
            let rows = pool.install(|| {
                durations
                    .par_iter()
                    .map(|&d| speed_case(&model, &state0, &schedule, &reference, d, dt, damping))
                    .collect::<Result<Vec<_>>>()
            })?;
            let mut table = Table::new(
                ["duration_s", "final_deviation_m", "peak_kinetic_J"]
                    .map(String::from)
                    .to_vec(),
            );
            for row in rows {
                table.push(row);
            }
            table.emit(out.as_deref())
        }
    }
}

fn levy_case(opts: &LevyOptions) -> Result<Vec<f64>> {
    let s = scenarios::levy(&levy_params(opts))?;
    let r = linear::modal(
        &s.model,
        &s.state,
        TangentForm::Consistent,
        linear::DEFAULT_RIGID_THRESHOLD,
    )?;
    let hz = r.frequencies_hz();
    let f1 = (0..hz.len())
        .find(|&k| !r.rigid[k])
        .map_or(f64::NAN, |k| hz[k]);
    let t_c = &s.fixtures.t_c;
    let (strings, bars): (Vec<usize>, Vec<usize>) =
        (0..s.model.n_elements()).partition(|&e| s.model.is_string(e));
    let min_string = strings
        .iter()
        .map(|&e| t_c[e])
        .fold(f64::INFINITY, f64::min);
    let max_bar = bars
        .iter()
        .map(|&e| -t_c[e])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        opts.deployment,
        s.fixtures.prestress_modes as f64,
        f1,
        min_string,
        max_bar,
    ])
}

/// Stretches every trajectory of `schedule` in time so that it ends at `duration`.
fn rescale(schedule: &ActuationSchedule, duration: f64) -> Result<ActuationSchedule> {
    let scale = duration / schedule.end_time();
    let map = |list: &[IndexedTrajectory]| -> Result<Vec<IndexedTrajectory>> {
        list.iter()
            .map(|e| {
                let times = e.trajectory.times().iter().map(|t| t * scale).collect();
                Ok(IndexedTrajectory {
                    index: e.index,
                    trajectory: Trajectory::new(times, e.trajectory.values().to_vec())?,
                })
            })
            .collect()
    };
    Ok(ActuationSchedule {
        rest_lengths: map(&schedule.rest_lengths)?,
        forces: map(&schedule.forces)?,
        boundary: map(&schedule.boundary)?,
    })
}

fn speed_case(
    model: &StructureModel,
    state0: &StructureState,
    schedule: &ActuationSchedule,
    reference: &nalgebra::DVector<f64>,
    duration: f64,
    dt: f64,
    damping: f64,
) -> Result<Vec<f64>> {
    if !(duration > 0.0) {
        return Err(CliError::Usage(format!(
            "duration must be positive, got {duration}"
        )));
    }
    let scaled = rescale(schedule, duration)?;
    let steps = (duration / dt).round().max(1.0) as usize;
    let options = DynamicsOptions {
        dt,
        t_end: duration,
        stride: (steps / 200).max(1),
        damping_scale: damping,
        skip_stability_check: false,
    };
    let history = dynamics::integrate(model, state0, &scaled, &options)?;
    let last = history.last().expect("nonempty history");
    let deviation = model
        .boundary
        .free()
        .iter()
        .map(|&i| (last.n[i] - reference[i]).abs())
        .fold(0.0, f64::max);
    let peak = history
        .samples
        .iter()
        .map(|s| s.energy.kinetic)
        .fold(0.0, f64::max);
    Ok(vec![duration, deviation, peak])
}
