//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its measurements and elapsed time; any failure exits nonzero.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{dbscan_reference, eigen_singular_values, lof_reference, random_points, to_embeddings};
use idforge_cli::commands::{compare_rows, Command, CompareArgs, DiscoveryArgs, GenArgs, ReplayArgs, SimulateArgs};
use idforge_cli::formats::{self, Format};
use idforge_cli::manifest;
use idforge_cli::story::{render_shot, sweep, SimulationConfig, Story, StorySpec};
use idforge_core::baselines::{dbscan, lof_scores, PointLabel};
use idforge_core::diffusion::prompt_to_target;
use idforge_core::discovery::projector_from_svd;
use idforge_core::injection::{masked_pearson, DenoiseSource};
use idforge_core::synth::precision_recall;
use idforge_core::{
    discover_identity, generate_embeddings, mat_mul, sample_with_cache, thin_svd, DiscoveryConfig, InjectionConfig,
    Mask, Matrix, OracleDenoiser, Schedule, SyntheticEmbeddingConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn story_spec(seed: u64, characters: usize) -> StorySpec {
    let names = ["a tall baker", "a small dog"];
    let prompts = match characters {
        0 => vec!["an empty street at dawn".to_string()],
        1 => vec!["@0 opens the shop".to_string(), "@0 walks along the river".to_string()],
        _ => vec![
            "@0 opens the shop".to_string(),
            "@0 feeds @1 by the door".to_string(),
            "@1 sleeps under a tree".to_string(),
        ],
    };
    StorySpec { characters: names[..characters].iter().map(|s| s.to_string()).collect(), prompts, seed }
}

fn retention() -> Verdict {
    let pool = generate_embeddings(&SyntheticEmbeddingConfig { num_identities: 1, ..Default::default() }).unwrap();
    let start = Instant::now();
    let report = discover_identity(&pool[0].embeddings, &DiscoveryConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let chain: Vec<usize> = report.iterations.iter().map(|it| it.kept_ids.len()).collect();
    verdict(
        chain == [38, 22, 13] && report.kept_ids().len() == 13 && elapsed < Duration::from_millis(100),
        format!("chain {chain:?}, fraction {:.4}, {:.1} ms", report.retained_fraction, elapsed.as_secs_f64() * 1e3),
    )
}

fn compactness() -> Verdict {
    let args = CompareArgs {
        inputs: vec![],
        out: "unused".into(),
        discovery: DiscoveryArgs::default(),
        shrinkage: idforge_core::baselines::DEFAULT_SHRINKAGE,
        lof_neighbors: None,
        eps: None,
        min_pts: idforge_core::baselines::DBSCAN_DEFAULT_MIN_PTS,
    };
    let (mut vs_naive, mut vs_all) = (0, 0);
    for seed in 0..100 {
        let cfg = SyntheticEmbeddingConfig { contamination: 0.3, num_identities: 1, seed, ..Default::default() };
        let id = generate_embeddings(&cfg).unwrap().remove(0);
        let rows = compare_rows("id", &id.embeddings, Some(&id.inlier), &args).unwrap();
        let get = |m: &str| rows.iter().find(|r| r.method == m).map(|r| r.compactness);
        let disc = get("discovery").unwrap();
        vs_naive += usize::from(disc <= get("naive").unwrap());
        vs_all += usize::from(["lof", "dbscan"].iter().all(|m| get(m).map_or(true, |c| disc <= c)));
    }
    verdict(vs_naive >= 95 && vs_all >= 80, format!("<= naive {vs_naive}/100, <= every baseline {vs_all}/100"))
}

fn iteration_precision() -> Verdict {
    let mut sums = [0.0; 3];
    let mut violations = 0;
    for seed in 0..100 {
        let cfg = SyntheticEmbeddingConfig { contamination: 0.5, num_identities: 1, seed, ..Default::default() };
        let id = generate_embeddings(&cfg).unwrap().remove(0);
        let report = discover_identity(&id.embeddings, &DiscoveryConfig::default()).unwrap();
        let p: Vec<f64> = report.iterations.iter().map(|it| precision_recall(&it.kept_ids, &id.inlier).0).collect();
        p.iter().zip(sums.iter_mut()).for_each(|(v, s)| *s += v / 100.0);
        violations += usize::from(p.windows(2).any(|w| w[1] < w[0]));
    }
    verdict(
        violations <= 5 && sums.windows(2).all(|w| w[1] >= w[0]),
        format!("mean precision {:.3} / {:.3} / {:.3}, {violations} violating seeds", sums[0], sums[1], sums[2]),
    )
}

fn svd_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut recon, mut idem, mut trace, mut sv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let (m, d) = (rng.random_range(1..=32), rng.random_range(1..=32));
        let a = Matrix::from_vec(m, d, (0..m * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let f = thin_svd(&a).unwrap();
        recon = recon.max(f.reconstruct().sub(&a).unwrap().max_abs());
        for (s, o) in f.singular_values.iter().zip(eigen_singular_values(&a)) {
            sv = sv.max((s - o).abs());
        }
        let k = rng.random_range(1..=f.singular_values.len());
        let w = projector_from_svd(&f, k).unwrap();
        idem = idem.max(mat_mul(&w, &w).unwrap().sub(&w).unwrap().max_abs());
        trace = trace.max((w.trace() - k as f64).abs());
    }
    verdict(
        recon <= 1e-8 && idem <= 1e-9 && trace <= 1e-9 && sv <= 1e-7,
        format!("reconstruction {recon:.1e}, idempotence {idem:.1e}, trace {trace:.1e}, singular values {sv:.1e}"),
    )
}

fn baseline_oracles() -> Verdict {
    let (mut lof_exact, mut lof_close, mut db_exact) = (0, 0, 0);
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let pts = random_points(1000 + seed, 25);
        let e = to_embeddings(&pts);
        let k = 2 + (seed as usize % (pts.len() - 2));
        let got = lof_scores(&e, k).unwrap();
        let want = lof_reference(&pts, k);
        let diff = got.iter().zip(&want).map(|(g, w)| (g - w).abs() / w.abs().max(1.0)).fold(0.0, f64::max);
        worst = worst.max(diff);
        lof_exact += usize::from(got == want);
        lof_close += usize::from(diff <= 1e-12);
        let eps = [0.5, 1.0, 1.5, 2.5, 4.0][seed as usize % 5];
        let min_pts = 1 + seed as usize % 6;
        let labels: Vec<Option<usize>> = dbscan(&e, eps, min_pts)
            .unwrap()
            .labels
            .iter()
            .map(|l| match l {
                PointLabel::Cluster(c) => Some(*c),
                PointLabel::Noise => None,
            })
            .collect();
        db_exact += usize::from(labels == dbscan_reference(&pts, eps, min_pts));
    }
    verdict(
        lof_close == 50 && db_exact == 50,
        format!(
            "LOF bitwise {lof_exact}/50, within 1e-12 {lof_close}/50 (worst {worst:.1e}); DBSCAN exact {db_exact}/50"
        ),
    )
}

fn ddim_reconstruction() -> Verdict {
    let s = Schedule::default();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let target = prompt_to_target("@0 walks home", 32, seed);
        let oracle = OracleDenoiser::new(target.clone(), &s);
        let traj = sample_with_cache(&oracle, "@0 walks home", None, seed, 32, &s).unwrap();
        worst = worst.max(traj.final_latent().max_abs_diff(&target).unwrap());
    }
    verdict(worst <= 1e-6, format!("worst max-abs error {worst:.1e} over 20 seeds"))
}

fn background_fidelity() -> Verdict {
    let schedule = Schedule::default();
    let cfg = SimulationConfig::default();
    let injection = InjectionConfig { k_max: 0, ..cfg.injection };
    let (mut exact, mut cells) = (0, 0usize);
    for seed in 0..20 {
        let story = Story::prepare(story_spec(seed, 2), &cfg, &schedule).unwrap();
        let mut all = true;
        for (t, shot) in story.templates.iter().zip(story.render(&injection, &schedule).unwrap()) {
            let bg = t.masks.downsample(t.trajectory.side()).unwrap();
            let cached = t.trajectory.final_latent().values();
            for (i, &b) in bg.background().bits().iter().enumerate() {
                if b {
                    cells += 1;
                    all &= shot.trace.latent.values()[i].to_bits() == cached[i].to_bits();
                }
            }
        }
        exact += usize::from(all);
    }
    verdict(exact == 20, format!("bitwise background in {exact}/20 stories ({cells} cells checked)"))
}

fn injection_efficacy() -> Verdict {
    let schedule = Schedule::default();
    let cfg = SimulationConfig { prior_std: 0.0, ..Default::default() };
    let mut worst_single = f64::INFINITY;
    for seed in 0..20 {
        let story = Story::prepare(story_spec(seed, 1), &cfg, &schedule).unwrap();
        for shot in story.render(&cfg.injection, &schedule).unwrap() {
            worst_single = worst_single.min(shot.scores[0].identity_correlation);
        }
    }
    let mut separated = 0;
    for seed in 0..20 {
        let spec = StorySpec { prompts: vec!["@0 feeds @1 by the door".into()], ..story_spec(seed, 2) };
        let story = Story::prepare(spec, &cfg, &schedule).unwrap();
        let t = &story.templates[0];
        let shot = render_shot(t, &story.characters, &cfg.injection, &schedule).unwrap();
        let small = t.masks.downsample(t.trajectory.side()).unwrap();
        let ok = t.cast.iter().zip(small.characters()).all(|(&c, m)| {
            let own = masked_pearson(&shot.trace.latent, &story.characters[c].target, m).unwrap();
            let cross = masked_pearson(&shot.trace.latent, &story.characters[1 - c].target, m).unwrap();
            own > cross
        });
        separated += usize::from(ok);
    }
    verdict(
        worst_single >= 0.99 && separated == 20,
        format!("single-character worst correlation {worst_single:.4}; own > cross in {separated}/20"),
    )
}

const SWEEP: [usize; 5] = [10, 20, 30, 40, 50];

fn sweet_spot() -> Verdict {
    let schedule = Schedule::default();
    let cfg = SimulationConfig::default();
    let (mut bg_up, mut id_up) = (0, 0);
    for seed in 0..20 {
        let story = Story::prepare(story_spec(seed, 2), &cfg, &schedule).unwrap();
        let points = sweep(&story, &cfg.injection, &SWEEP, &schedule).unwrap();
        bg_up += usize::from(points.windows(2).all(|w| w[1].background_deviation > w[0].background_deviation));
        id_up += usize::from(points.windows(2).all(|w| w[1].identity_correlation > w[0].identity_correlation));
    }
    verdict(bg_up >= 18 && id_up >= 18, format!("background rises {bg_up}/20, identity rises {id_up}/20"))
}

fn progressive_masks() -> Verdict {
    let schedule = Schedule::default();
    let cfg = SimulationConfig::default();
    let mut wins = 0;
    for seed in 0..20 {
        let story = Story::prepare(story_spec(seed, 2), &cfg, &schedule).unwrap();
        let seam = |k_max: usize| {
            let shots = story.render(&InjectionConfig { k_max, ..cfg.injection }, &schedule).unwrap();
            shots.iter().map(|s| s.seam).sum::<f64>() / shots.len() as f64
        };
        wins += usize::from(seam(50) <= seam(0));
    }
    verdict(wins >= 16, format!("progressive seam <= fixed in {wins}/20"))
}

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().is_some_and(|n| n != "manifest.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn round_trips() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut bin_ok, mut text_ok, mut mask_ok) = (0, 0, 0);
    for _ in 0..50 {
        let (r, c) = (rng.random_range(1..20), rng.random_range(1..20));
        let f32s: Vec<f64> = (0..r * c).map(|_| rng.random_range(-5.0f32..5.0) as f64).collect();
        let m = Matrix::from_vec(r, c, f32s).unwrap();
        bin_ok += usize::from(formats::decode_bin(&formats::encode_bin(&m)).unwrap() == m);
        let wide = Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1e3..1e3)).collect()).unwrap();
        let labels: Vec<bool> = (0..r).map(|_| rng.random_bool(0.5)).collect();
        let back = formats::decode_text(&formats::encode_text(&wide, Some(&labels))).unwrap();
        let close = back.matrix.as_slice().iter().zip(wide.as_slice()).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs());
        text_ok += usize::from(close && back.labels.as_deref() == Some(&labels[..]));
        let side = rng.random_range(1..40);
        let mask = Mask::from_fn(side, |_, _| rng.random_bool(0.3));
        mask_ok += usize::from(formats::decode_pgm(&formats::encode_pgm(&mask)).unwrap() == mask);
    }

    let root = tempfile::tempdir().unwrap();
    let story_path = root.path().join("story.json");
    fs::write(&story_path, serde_json::to_vec(&story_spec(3, 2)).unwrap()).unwrap();
    let commands = [
        Command::GenEmbeddings(GenArgs {
            out: root.path().join("gen"),
            dim: 64,
            samples: 32,
            sigma_in: 0.1,
            subspace_dim: 8,
            ambient_std: 0.005,
            contamination: 0.3,
            identities: 2,
            seed: 5,
            format: Format::Bin,
        }),
        Command::Simulate(SimulateArgs {
            story: story_path,
            out: root.path().join("sim"),
            t_prime: 40,
            k_max: 50,
            latent_side: 16,
            seed: None,
            prior_std: 0.3,
            samples: 32,
            contamination: 0.3,
            denoise_source: DenoiseSource::Composed,
            sweep_t_prime: vec![20, 40],
            discovery: DiscoveryArgs::default(),
            format: Format::Bin,
        }),
    ];
    let mut replays = 0;
    for cmd in &commands {
        let (_, manifest_path) = manifest::run(cmd).unwrap();
        let first = cmd.out_path().unwrap().to_path_buf();
        let again = first.with_extension("replay");
        manifest::run(&Command::Replay(ReplayArgs { manifest: manifest_path, out: Some(again.clone()) })).unwrap();
        let (a, b) = (files_under(&first), files_under(&again));
        replays += usize::from(!a.is_empty() && a == b);
    }
    verdict(
        bin_ok == 50 && text_ok == 50 && mask_ok == 50 && replays == commands.len(),
        format!("binary {bin_ok}/50, text {text_ok}/50, mask {mask_ok}/50, replay {replays}/{}", commands.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict, Option<Duration>); 11] = [
        ("1 retention arithmetic", retention, None),
        ("2 compactness ordering", compactness, Some(Duration::from_secs(30))),
        ("3 iteration precision", iteration_precision, Some(Duration::from_secs(30))),
        ("4 svd and projector", svd_suite, Some(Duration::from_secs(5))),
        ("5 baseline oracles", baseline_oracles, Some(Duration::from_secs(5))),
        ("6 ddim reconstruction", ddim_reconstruction, Some(Duration::from_secs(2))),
        ("7 background fidelity", background_fidelity, Some(Duration::from_secs(5))),
        ("8 injection efficacy", injection_efficacy, Some(Duration::from_secs(10))),
        ("9 sweet-spot sweep", sweet_spot, Some(Duration::from_secs(60))),
        ("10 progressive masks", progressive_masks, None),
        ("11 round-trips and replay", round_trips, Some(Duration::from_secs(2))),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let in_time = budget.map_or(true, |b| elapsed <= b);
        let pass = v.pass && in_time;
        failed += usize::from(!pass);
        let budget_note = budget.map(|b| format!(" / {:.0} s budget", b.as_secs_f64())).unwrap_or_default();
        println!(
            "{} criterion {name}: {} [{:.2} s{budget_note}]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
