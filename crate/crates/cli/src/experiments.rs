//! Experiment presets: each builds its model from the configuration, runs
//! replicas in parallel, and hands one deterministic artifact set to the
//! collector.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use lrbs_core::cml::cml_step;
use lrbs_core::field::Field;
use lrbs_core::geometry::Ball;
use lrbs_core::kernel::OffsetMap;
use lrbs_core::logistic::{occupancy_margins, shrinking_intervals};
use lrbs_core::model::{MeanPipeline, ModelParams, OccupancyParams};
use lrbs_core::percolation::{analyze, extract_good_blocks, PercolationField};
use lrbs_core::rng::{derive_seed, RngKeyStream};
use lrbs_core::sandbox::{colonization_sandbox, sandbox_thresholds};
use lrbs_core::stochastic::{
    run_coupled, run_trajectory, occupation_frequency, CoupledDiagnostics, TrajectoryOptions,
    TwoSpeciesParams, TwoSpeciesStepper,
};
use lrbs_core::{CountField, Field64};

use crate::config::{ExperimentKind, RunConfig};
use crate::output::{fmt_bool, fmt_opt, ArtifactSet, SeriesRecord, SummaryTable};
use crate::snapshot::{render_count_field, render_real_field};
use crate::{plot, CliError, CliResult};

/// How to run: output directory, plot emission, worker threads
/// (0 uses the rayon default).
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub plots: bool,
    pub threads: usize,
}

/// Run the configured experiment and write its artifacts. Returns the
/// paths written. The exit status of the binary reflects only mechanical
/// success; scientific outcomes live in the artifacts.
pub fn run_experiment(config: &RunConfig, options: &RunOptions) -> CliResult<Vec<PathBuf>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads)
        .build()
        .map_err(|e| CliError::ConfigGeneral(format!("thread pool: {e}")))?;
    let mut artifacts = pool.install(|| match config.kind {
        ExperimentKind::Simulate => simulate(config),
        ExperimentKind::Cml => cml(config),
        ExperimentKind::Couple => couple(config),
        ExperimentKind::TwoSpecies => two_species(config),
        ExperimentKind::Logistic => logistic(config),
        ExperimentKind::Lemma7 => lemma7(config),
        ExperimentKind::Percolation => percolation(config),
        ExperimentKind::SurvivalSweep => survival_sweep(config),
        ExperimentKind::CoexistenceSweep => coexistence_sweep(config),
        ExperimentKind::CompleteConvergence => complete_convergence(config, options.plots),
    })?;
    artifacts.extra.insert(0, ("config_echo.txt".to_string(), config.echo()));
    if options.plots {
        add_series_plot(&mut artifacts);
    }
    artifacts.write(&options.out_dir)
}

fn add_series_plot(artifacts: &mut ArtifactSet) {
    if artifacts.series.is_empty() {
        return;
    }
    let mut curves: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for record in &artifacts.series {
        if record.replica >= 8 {
            continue;
        }
        if curves.len() <= record.replica as usize {
            curves.push((format!("replica {}", record.replica), Vec::new()));
        }
        curves[record.replica as usize].1.push((record.step as f64, record.total_mass));
    }
    artifacts.extra.push(("series.svg".to_string(), plot::line_chart("total mass", &curves)));
}

fn occupancy_from_config(
    config: &RunConfig,
    params: &ModelParams<f64>,
) -> CliResult<Option<OccupancyParams<f64>>> {
    if let (Some(e1), Some(e2)) = (config.f64("eps1")?, config.f64("eps2")?) {
        return Ok(Some(OccupancyParams::new(e1, e2)?));
    }
    let m = params.m;
    if m <= 1.0 || m >= 4.0 {
        return Ok(None);
    }
    let m_tilde = config.f64("m_tilde")?.unwrap_or((1.0 + m) / 2.0);
    let delta = config.f64("delta")?.unwrap_or(0.1);
    match occupancy_margins(m, delta, m_tilde, &params.dispersal) {
        Ok(margins) => Ok(Some(OccupancyParams::new(margins.eps1, margins.eps2)?)),
        Err(_) => Ok(None),
    }
}

fn replica_rng(seed: u64, replica: u32) -> RngKeyStream {
    RngKeyStream::new(derive_seed(seed, replica as u64), 0)
}

fn simulate(config: &RunConfig) -> CliResult<ArtifactSet> {
    let params = config.params()?;
    let steps = config.u64_or("steps", 500)?;
    let replicas = config.u32_or("replicas", 1)?;
    let init = config.init("init")?;
    let occupancy = occupancy_from_config(config, &params)?;
    let snapshot_steps = config.snapshot_steps()?;
    let trajectory_options = TrajectoryOptions {
        early_stop_extinction: config.bool_or("early_stop", true)?,
        occupancy,
        record_draws: false,
    };

    struct Out {
        record: lrbs_core::stochastic::RunRecord,
        snapshots: Vec<(u64, CountField)>,
    }
    let results: Vec<Out> = (0..replicas)
        .into_par_iter()
        .map(|replica| {
            let rng = replica_rng(config.seed, replica);
            let field0 = init.count_field(&params.geometry, &rng, 0);
            let mut snapshots = Vec::new();
            let (record, _) =
                run_trajectory(&field0, &params, steps, &rng, &trajectory_options, |t, field| {
                    if snapshot_steps.contains(&t) {
                        snapshots.push((t, field.clone()));
                    }
                });
            Out { record, snapshots }
        })
        .collect();

    let mut summary = SummaryTable::new(vec![
        "replica",
        "extinct",
        "extinction_step",
        "final_mass",
        "occupation_frequency",
        "alive_at_end",
    ]);
    let mut artifacts = ArtifactSet::default();
    for (replica, out) in results.iter().enumerate() {
        summary.push(vec![
            replica.to_string(),
            fmt_bool(out.record.extinct()),
            fmt_opt(out.record.extinction_step),
            out.record.last_mass().to_string(),
            occupation_frequency(&out.record).to_string(),
            fmt_bool(out.record.last_mass() > 0.0),
        ]);
        for stats in &out.record.steps {
            artifacts.series.push(SeriesRecord {
                replica: replica as u32,
                step: stats.time,
                total_mass: stats.total_mass,
                occupied: stats.occupied,
                origin_positive: Some(stats.origin_positive),
                ..Default::default()
            });
        }
        for (step, field) in &out.snapshots {
            let name = format!("snap-r{replica:03}-s{step:06}.field");
            artifacts.extra.push((name, render_count_field(field, *step, config.seed)));
        }
    }
    artifacts.summary = Some(summary);
    Ok(artifacts)
}

fn cml(config: &RunConfig) -> CliResult<ArtifactSet> {
    let params = config.params()?;
    let steps = config.u64_or("steps", 200)?;
    let tol = config.f64_or("tol", 1e-8)?;
    let window_radius = config.i64_or("window_radius", 2)?;
    let init = config.init("init")?;
    let rng = RngKeyStream::new(config.seed, 0);
    let snapshot_steps = config.snapshot_steps()?;

    let target = params.derived().equilibrium;
    let window = Ball::at_origin(params.geometry.dim(), window_radius);
    let window_sites = window.sites(&params.geometry);
    let mut pipeline = MeanPipeline::new(&params);
    let mut field = init.real_field(&params.geometry, &rng, 0);
    let mut next: Field64 = Field::zero(params.geometry.clone());
    let mut artifacts = ArtifactSet::default();
    let mut history: Vec<f64> = Vec::with_capacity(steps as usize + 1);
    let deviation = |f: &Field64| {
        window_sites.iter().fold(0.0f64, |acc, &i| acc.max((f.get(i) - target).abs()))
    };
    for t in 0..=steps {
        if t > 0 {
            pipeline.dispersed_means(field.values(), next.values_mut());
            std::mem::swap(&mut field, &mut next);
        }
        let dev = deviation(&field);
        history.push(dev);
        artifacts.series.push(SeriesRecord {
            replica: 0,
            step: t,
            total_mass: field.total_mass::<f64>(),
            deviation: Some(dev),
            ..Default::default()
        });
        if snapshot_steps.contains(&t) {
            let name = format!("snap-r000-s{t:06}.field");
            artifacts.extra.push((name, render_real_field(&field, t, config.seed)));
        }
    }
    let last_bad = history.iter().rposition(|d| *d > tol);
    let (converged, n0) = match last_bad {
        None => (true, Some(0u64)),
        Some(i) if i + 1 < history.len() => (true, Some(i as u64 + 1)),
        Some(_) => (false, None),
    };
    let mut summary =
        SummaryTable::new(vec!["replica", "converged", "n0", "target", "final_deviation"]);
    summary.push(vec![
        "0".into(),
        fmt_bool(converged),
        fmt_opt(n0),
        target.to_string(),
        history.last().unwrap().to_string(),
    ]);
    artifacts.summary = Some(summary);
    Ok(artifacts)
}

fn couple(config: &RunConfig) -> CliResult<ArtifactSet> {
    let params = config.params()?;
    let steps = config.u64_or("steps", 2000)?;
    let replicas = config.u32_or("replicas", 1)?;
    let init1 = config.init("init1")?;
    let init2 = config.init("init2")?;
    let max_extent = *params.geometry.extents().iter().max().unwrap() as i64;
    let window_radius = config.i64_or("window_radius", max_extent / 2)?;
    let window = Ball::at_origin(params.geometry.dim(), window_radius);
    let diagnostics = if config.bool_or("diagnostics", true)? {
        CoupledDiagnostics::defaults(&params)
    } else {
        None
    };

    let results: Vec<_> = (0..replicas)
        .into_par_iter()
        .map(|replica| {
            let rng = replica_rng(config.seed, replica);
            let f1 = init1.count_field(&params.geometry, &rng, 0);
            let f2 = init2.count_field(&params.geometry, &rng, 1);
            run_coupled(&f1, &f2, &params, steps, &window, &rng, diagnostics.as_ref())
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut summary = SummaryTable::new(vec![
        "replica",
        "locked",
        "lock_step",
        "final_agreement",
        "core_locked",
        "mid_in_interval",
        "outer_in_window",
    ]);
    let mut artifacts = ArtifactSet::default();
    for (replica, (record, lock)) in results.iter().enumerate() {
        let last = record.steps.last().expect("at least the initial step");
        summary.push(vec![
            replica.to_string(),
            fmt_bool(lock.is_some()),
            fmt_opt(*lock),
            last.agreement.to_string(),
            fmt_opt(last.core_locked.map(fmt_bool)),
            fmt_opt(last.mid_in_interval.map(fmt_bool)),
            fmt_opt(last.outer_in_window.map(fmt_bool)),
        ]);
        for stats in &record.steps {
            artifacts.series.push(SeriesRecord {
                replica: replica as u32,
                step: stats.time,
                total_mass: stats.mass1,
                mass2: Some(stats.mass2),
                agreement: Some(stats.agreement),
                ..Default::default()
            });
        }
    }
    artifacts.summary = Some(summary);
    Ok(artifacts)
}

fn two_species_params(config: &RunConfig) -> CliResult<TwoSpeciesParams<f64>> {
    let geometry = config.geometry()?;
    let m1 = config.require_f64("m1")?;
    let m2 = config.require_f64("m2")?;
    let disp = |section: &str| {
        if config.kernels.contains_key(section) {
            config.dispersal(section)
        } else {
            config.dispersal("dispersal")
        }
    };
    Ok(TwoSpeciesParams::new(
        m1,
        m2,
        disp("dispersal1")?,
        disp("dispersal2")?,
        config.competition("competition11")?,
        config.competition("competition22")?,
        config.cross_kernel("competition12")?,
        config.cross_kernel("competition21")?,
        geometry,
    )?)
}

struct TwoSpeciesOut {
    per_step: Vec<(u64, f64, f64)>,
    alive1: bool,
    alive2: bool,
}

fn run_two_species(
    params: &TwoSpeciesParams<f64>,
    f1: &CountField,
    f2: &CountField,
    steps: u64,
    rng: &RngKeyStream,
) -> TwoSpeciesOut {
    let mut stepper = TwoSpeciesStepper::new(params);
    let mut a = f1.clone();
    let mut b = f2.clone();
    let mut per_step =
        vec![(0u64, a.total_mass::<f64>(), b.total_mass::<f64>())];
    for t in 0..steps {
        let (na, nb) = stepper.step(&a, &b, rng, t);
        a = na;
        b = nb;
        per_step.push((t + 1, a.total_mass::<f64>(), b.total_mass::<f64>()));
        if a.is_extinct() && b.is_extinct() {
            break;
        }
    }
    TwoSpeciesOut { per_step, alive1: !a.is_extinct(), alive2: !b.is_extinct() }
}

fn two_species(config: &RunConfig) -> CliResult<ArtifactSet> {
    let params = two_species_params(config)?;
    let steps = config.u64_or("steps", 500)?;
    let replicas = config.u32_or("replicas", 1)?;
    let init1 = config.init("init1")?;
    let init2 = config.init("init2")?;

    let results: Vec<TwoSpeciesOut> = (0..replicas)
        .into_par_iter()
        .map(|replica| {
            let rng = replica_rng(config.seed, replica);
            let f1 = init1.count_field(&params.geometry, &rng, 0);
            let f2 = init2.count_field(&params.geometry, &rng, 1);
            run_two_species(&params, &f1, &f2, steps, &rng)
        })
        .collect();

    let mut summary = SummaryTable::new(vec!["replica", "alive1", "alive2", "coexist"]);
    let mut artifacts = ArtifactSet::default();
    for (replica, out) in results.iter().enumerate() {
        summary.push(vec![
            replica.to_string(),
            fmt_bool(out.alive1),
            fmt_bool(out.alive2),
            fmt_bool(out.alive1 && out.alive2),
        ]);
        for &(t, mass1, mass2) in &out.per_step {
            artifacts.series.push(SeriesRecord {
                replica: replica as u32,
                step: t,
                total_mass: mass1,
                mass2: Some(mass2),
                ..Default::default()
            });
        }
    }
    artifacts.summary = Some(summary);
    Ok(artifacts)
}

fn logistic(config: &RunConfig) -> CliResult<ArtifactSet> {
    let m = config.require_f64("m")?;
    let eps = config.f64_or("eps", 0.05)?;
    let pair = shrinking_intervals(m, eps)?;
    let mut csv = String::from("n,alpha,beta\n");
    for n in 0..pair.alphas.len() {
        csv.push_str(&format!("{n},{},{}\n", pair.alphas[n], pair.betas[n]));
    }
    let mut summary = SummaryTable::new(vec!["m", "eps", "gamma", "n0"]);
    summary.push(vec![m.to_string(), eps.to_string(), pair.gamma.to_string(), pair.n0.to_string()]);
    let mut artifacts = ArtifactSet::default();
    artifacts.summary = Some(summary);
    artifacts.extra.push(("logistic.csv".to_string(), csv));
    Ok(artifacts)
}

fn lemma7(config: &RunConfig) -> CliResult<ArtifactSet> {
    let m = config.require_f64("m")?;
    let dispersal = config.dispersal("dispersal")?;
    let m_tilde = config.f64_or("m_tilde", (1.0 + m) / 2.0)?;
    let delta = config.f64_or("delta", 0.05)?;
    let k_threshold = config.f64_or("k_threshold", 1.0)?;
    let seeds = config.u32_or("replicas", 200)?;
    let thresholds = sandbox_thresholds(m, &dispersal, delta, k_threshold, m_tilde)?;
    let competition = if config.kernels.contains_key("competition") {
        config.competition("competition")?
    } else {
        lrbs_core::kernel::CompetitionKernel::on_site(
            dispersal.dim(),
            0.9 * thresholds.lambda0_star,
        )?
    };

    let results: Vec<_> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            colonization_sandbox(
                m,
                &dispersal,
                &competition,
                &thresholds,
                delta,
                k_threshold,
                None,
                derive_seed(config.seed, s as u64),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut summary =
        SummaryTable::new(vec!["seed_index", "all_occupied", "in_contract", "violation"]);
    for (s, verdict) in results.iter().enumerate() {
        let violation = verdict
            .cap_violation
            .as_ref()
            .map(|(site, t)| format!("cap@{site:?}t{t}"))
            .or_else(|| {
                verdict
                    .noise_violation
                    .as_ref()
                    .map(|(site, t)| format!("noise@{site:?}t{t}"))
            })
            .unwrap_or_default();
        summary.push(vec![
            s.to_string(),
            fmt_bool(verdict.all_occupied),
            fmt_bool(verdict.in_contract()),
            violation,
        ]);
    }
    let mut artifacts = ArtifactSet::default();
    artifacts.summary = Some(summary);
    artifacts.extra.push((
        "thresholds.txt".to_string(),
        format!(
            "eps1 = {}\neps2 = {}\nn_star = {}\nreach_min = {}\nlambda0_star = {}\nkappa_star = {}\nalpha = {}\nlambda0 = {}\nkappa = {}\n",
            thresholds.eps1,
            thresholds.eps2,
            thresholds.n_star,
            thresholds.reach_min,
            thresholds.lambda0_star,
            thresholds.kappa_star,
            thresholds.alpha,
            competition.lambda0(),
            competition.kappa(),
        ),
    ));
    Ok(artifacts)
}

fn percolation(config: &RunConfig) -> CliResult<ArtifactSet> {
    let theta = config.require_f64("theta")?;
    let horizon = config.u32_or("horizon", 100)?;
    let radius = config.i64_or("radius", horizon as i64)?;
    let cone_slope = config.f64_or("cone_slope", 0.2)?;
    let from_time = config.u32_or("from_time", horizon / 4)?;
    let condition = config.bool_or("condition_on_survival", false)?;
    let replicas = config.u32_or("replicas", 100)?;
    let dim = config.get("extent").map(|_| config.extent()).transpose()?.map(|e| e.len()).unwrap_or(1);

    struct Out {
        attempts: u32,
        survives: bool,
        cluster: usize,
        wet: usize,
        max_dry: usize,
        exposed: usize,
    }
    let results: Vec<Out> = (0..replicas)
        .into_par_iter()
        .map(|replica| {
            let base = derive_seed(config.seed, replica as u64);
            let mut attempts = 0u32;
            loop {
                attempts += 1;
                let rng = RngKeyStream::new(derive_seed(base, attempts as u64), 0);
                let field = PercolationField::sample(theta, dim, radius, horizon, &rng)
                    .expect("theta validated");
                let report = analyze(&field, cone_slope, from_time);
                if report.survives || !condition || attempts >= 10_000 {
                    return Out {
                        attempts,
                        survives: report.survives,
                        cluster: report.cluster.len(),
                        wet: report.wet.len(),
                        max_dry: report.dry_cluster_sizes.first().copied().unwrap_or(0),
                        exposed: report.exposed.len(),
                    };
                }
            }
        })
        .collect();

    let mut summary = SummaryTable::new(vec![
        "replica",
        "attempts",
        "survives",
        "cluster_size",
        "wet_count",
        "max_dry_cluster",
        "exposed_beyond_burnin",
    ]);
    for (replica, out) in results.iter().enumerate() {
        summary.push(vec![
            replica.to_string(),
            out.attempts.to_string(),
            fmt_bool(out.survives),
            out.cluster.to_string(),
            out.wet.to_string(),
            out.max_dry.to_string(),
            out.exposed.to_string(),
        ]);
    }
    let mut artifacts = ArtifactSet::default();
    artifacts.summary = Some(summary);
    Ok(artifacts)
}

fn survival_sweep(config: &RunConfig) -> CliResult<ArtifactSet> {
    let m = config.require_f64("m")?;
    let dispersal = config.dispersal("dispersal")?;
    let lambda0_list = config
        .list_f64("lambda0_list")?
        .ok_or_else(|| CliError::ConfigGeneral("key 'lambda0_list' is required".into()))?;
    let steps = config.u64_or("steps", 100)?;
    let replicas = config.u32_or("replicas", 20)?;
    let m_tilde = config.f64_or("m_tilde", (1.0 + m) / 2.0)?;
    let block_eps2 = config.f64_or("block_eps2", 0.1)?;
    let block_delta = config.f64_or("block_delta", 0.5)?;
    let block_k = config.f64_or("block_k", 10.0)?;
    let geometry = config.geometry()?;
    let margins = occupancy_margins(m, 0.0, m_tilde, &dispersal)?;
    let n_star = margins.n_star;
    let reach = dispersal.range() + 1; // on-site competition in the sweep
    let default_spacing = (2 * n_star as i64 * reach) as u64;
    let spacing = config.u64_or("block_spacing", default_spacing)? as usize;

    let jobs: Vec<(usize, u32)> = lambda0_list
        .iter()
        .enumerate()
        .flat_map(|(a, _)| (0..replicas).map(move |r| (a, r)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(a, replica)| {
            let lambda0 = lambda0_list[a];
            let params = ModelParams::new(
                m,
                dispersal.clone(),
                lrbs_core::kernel::CompetitionKernel::on_site(dispersal.dim(), lambda0)
                    .expect("positive lambda0"),
                geometry.clone(),
            )
            .expect("geometry validated");
            let rng = RngKeyStream::new(
                derive_seed(derive_seed(config.seed, a as u64), replica as u64),
                0,
            );
            let equilibrium = params.derived().equilibrium;
            let field0 = CountField::constant(geometry.clone(), equilibrium.round() as u64);
            let options = TrajectoryOptions {
                record_draws: true,
                early_stop_extinction: true,
                occupancy: None,
            };
            let (record, draws) = run_trajectory(&field0, &params, steps, &rng, &options, |_, _| {});
            let draws = draws.expect("recording enabled");
            let blocks = extract_good_blocks(
                &draws, &params, block_eps2, block_delta, block_k, n_star, spacing,
            )
            .expect("draws recorded");
            let cap_density = blocks.cap_ok.iter().filter(|x| **x).count() as f64
                / blocks.len().max(1) as f64;
            let noise_density = blocks.noise_ok.iter().filter(|x| **x).count() as f64
                / blocks.len().max(1) as f64;
            (record.last_mass() > 0.0, blocks.density(), cap_density, noise_density, blocks.len())
        })
        .collect();

    let mut summary = SummaryTable::new(vec![
        "lambda0",
        "replica",
        "alive",
        "good_density",
        "cap_density",
        "noise_density",
        "blocks",
    ]);
    for (&(a, replica), (alive, good, cap, noise, blocks)) in jobs.iter().zip(&results) {
        summary.push(vec![
            lambda0_list[a].to_string(),
            replica.to_string(),
            fmt_bool(*alive),
            good.to_string(),
            cap.to_string(),
            noise.to_string(),
            blocks.to_string(),
        ]);
    }
    let mut artifacts = ArtifactSet::default();
    artifacts.summary = Some(summary);
    Ok(artifacts)
}

fn coexistence_sweep(config: &RunConfig) -> CliResult<ArtifactSet> {
    let base = two_species_params(config)?;
    let cross_list = config
        .list_f64("cross_list")?
        .ok_or_else(|| CliError::ConfigGeneral("key 'cross_list' is required".into()))?;
    let steps = config.u64_or("steps", 500)?;
    let replicas = config.u32_or("replicas", 50)?;
    let init1 = config.init("init1")?;
    let init2 = config.init("init2")?;

    let jobs: Vec<(usize, u32)> = cross_list
        .iter()
        .enumerate()
        .flat_map(|(a, _)| (0..replicas).map(move |r| (a, r)))
        .collect();
    let results: Vec<TwoSpeciesOut> = jobs
        .par_iter()
        .map(|&(a, replica)| {
            let cross = cross_list[a];
            let dim = base.geometry.dim();
            let cross_map = if cross > 0.0 {
                OffsetMap::new(dim, vec![(vec![0; dim], cross)]).expect("single entry")
            } else {
                OffsetMap::empty(dim)
            };
            let params = TwoSpeciesParams::new(
                base.m1,
                base.m2,
                base.dispersal1.clone(),
                base.dispersal2.clone(),
                base.intra1.clone(),
                base.intra2.clone(),
                cross_map.clone(),
                cross_map,
                base.geometry.clone(),
            )
            .expect("validated base");
            let rng = RngKeyStream::new(
                derive_seed(derive_seed(config.seed, a as u64), replica as u64),
                0,
            );
            let f1 = init1.count_field(&params.geometry, &rng, 0);
            let f2 = init2.count_field(&params.geometry, &rng, 1);
            run_two_species(&params, &f1, &f2, steps, &rng)
        })
        .collect();

    let mut summary =
        SummaryTable::new(vec!["cross", "replica", "alive1", "alive2", "coexist"]);
    for (&(a, replica), out) in jobs.iter().zip(&results) {
        summary.push(vec![
            cross_list[a].to_string(),
            replica.to_string(),
            fmt_bool(out.alive1),
            fmt_bool(out.alive2),
            fmt_bool(out.alive1 && out.alive2),
        ]);
    }
    let mut artifacts = ArtifactSet::default();
    artifacts.summary = Some(summary);
    Ok(artifacts)
}

fn complete_convergence(config: &RunConfig, plots: bool) -> CliResult<ArtifactSet> {
    let params = config.params()?;
    let steps = config.u64_or("steps", 5000)?;
    let burn_in = config.u64_or("burn_in", steps / 2)?;
    let window_radius = config.i64_or("window_radius", 1)?;
    let inits = [config.init("init1")?, config.init("init2")?];
    let window = Ball::at_origin(params.geometry.dim(), window_radius);
    let window_sites = window.sites(&params.geometry);
    let origin = params.geometry.origin();

    struct Arm {
        origin_mean: f64,
        samples: u64,
        histogram: std::collections::BTreeMap<u64, u64>,
        masses: Vec<(u64, f64)>,
    }
    let arms: Vec<Arm> = inits
        .par_iter()
        .enumerate()
        .map(|(arm, init)| {
            let rng = replica_rng(config.seed, arm as u32);
            let field0 = init.count_field(&params.geometry, &rng, arm as u64);
            let mut histogram = std::collections::BTreeMap::new();
            let mut origin_sum = 0u128;
            let mut samples = 0u64;
            let mut masses = Vec::with_capacity(steps as usize + 1);
            let options = TrajectoryOptions {
                early_stop_extinction: false,
                occupancy: None,
                record_draws: false,
            };
            let (_record, _) = run_trajectory(&field0, &params, steps, &rng, &options, |t, field| {
                masses.push((t, field.total_mass::<f64>()));
                if t >= burn_in {
                    origin_sum += *field.get(origin) as u128;
                    samples += 1;
                    for &site in &window_sites {
                        *histogram.entry(*field.get(site)).or_insert(0) += 1;
                    }
                }
            });
            Arm {
                origin_mean: origin_sum as f64 / samples.max(1) as f64,
                samples,
                histogram,
                masses,
            }
        })
        .collect();

    let mut summary = SummaryTable::new(vec!["arm", "origin_mean", "samples", "equilibrium"]);
    let eq = params.derived().equilibrium;
    let mut artifacts = ArtifactSet::default();
    for (arm, out) in arms.iter().enumerate() {
        summary.push(vec![
            arm.to_string(),
            out.origin_mean.to_string(),
            out.samples.to_string(),
            eq.to_string(),
        ]);
        let mut csv = String::from("value,count\n");
        for (value, count) in &out.histogram {
            csv.push_str(&format!("{value},{count}\n"));
        }
        artifacts.extra.push((format!("hist-arm{arm}.csv"), csv));
        for &(t, mass) in &out.masses {
            artifacts.series.push(SeriesRecord {
                replica: arm as u32,
                step: t,
                total_mass: mass,
                ..Default::default()
            });
        }
    }
    if plots {
        let curves: Vec<(String, Vec<(f64, f64)>)> = arms
            .iter()
            .enumerate()
            .map(|(arm, out)| {
                let pts = out
                    .histogram
                    .iter()
                    .map(|(v, c)| (*v as f64, *c as f64))
                    .collect();
                (format!("arm {arm}"), pts)
            })
            .collect();
        artifacts
            .extra
            .push(("histograms.svg".to_string(), plot::line_chart("window marginals", &curves)));
    }
    artifacts.summary = Some(summary);
    Ok(artifacts)
}

/// Total-variation distance between two integer histograms.
pub fn total_variation(
    a: &std::collections::BTreeMap<u64, u64>,
    b: &std::collections::BTreeMap<u64, u64>,
) -> f64 {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    if na == 0 || nb == 0 {
        return 1.0;
    }
    let keys: std::collections::BTreeSet<u64> = a.keys().chain(b.keys()).copied().collect();
    let mut tv = 0.0;
    for k in keys {
        let pa = *a.get(&k).unwrap_or(&0) as f64 / na as f64;
        let pb = *b.get(&k).unwrap_or(&0) as f64 / nb as f64;
        tv += (pa - pb).abs();
    }
    tv / 2.0
}
