//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use panosga::io::{save_image, save_labels, DatasetManifest, ManifestEntry};
use panosga::validation::DirPredictor;
use panosga::{
    aggregate, build_grid, compose, inter_loss, intra_loss, inverse, mirror_offsets,
    panorama_loss::row_weight, rot_x, rot_y, rot_z, rotate_labels, run_validation,
    sample_augmentation, sdpe_loss, summarize, weight_map, AugmentationConfig, ConfusionMatrix,
    GridSpec, ImageDims, LabelMap, OffsetField, PatchGrid, RotMat, RotationAngles,
};
use rand::Rng;

type Outcome = Result<String, String>;

const BASELINE_MIOU: [f64; 16] = [
    53.617, 49.292, 49.468, 47.234, 53.918, 49.861, 49.400, 47.589, 53.587, 49.344, 49.536, 47.458,
    53.669, 49.462, 49.363, 47.726,
];
const OURS_MIOU: [f64; 16] = [
    56.374, 56.073, 56.074, 55.784, 56.441, 55.954, 56.128, 55.636, 56.246, 55.951, 55.714, 55.501,
    56.223, 55.924, 55.983, 55.732,
];

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || {
        format!("{name} = {got}, expected {want} ± {tol}")
    })
}

fn ac1_table_aggregates() -> Outcome {
    let b = summarize(&BASELINE_MIOU).map_err(|e| e.to_string())?;
    within("baseline mean", b.mean, 50.033, 1e-3)?;
    within("baseline variance", b.variance, 5.147, 1e-3)?;
    within("baseline range", b.range, 6.684, 1e-3)?;
    let o = summarize(&OURS_MIOU).map_err(|e| e.to_string())?;
    within("ours mean", o.mean, 55.984, 1e-3)?;
    Ok(format!(
        "baseline {:.3}/{:.3}/{:.3}, ours mean {:.3}",
        b.mean, b.variance, b.range, o.mean
    ))
}

/// Same factors and the same left-to-right summation as `compose`, written
/// out independently.
fn brute_compose(yaw: f64, pitch: f64, roll: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = yaw.to_radians().sin_cos();
    let (sb, cb) = pitch.to_radians().sin_cos();
    let (sg, cg) = roll.to_radians().sin_cos();
    let rz = [[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]];
    let ry = [[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]];
    let rx = [[1.0, 0.0, 0.0], [0.0, cg, -sg], [0.0, sg, cg]];
    let mul = |a: [[f64; 3]; 3], b: [[f64; 3]; 3]| {
        let mut o = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                o[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c];
            }
        }
        o
    };
    mul(mul(rz, ry), rx)
}

fn ac3_rotation_algebra() -> Outcome {
    let mut r = rng(3);
    let mut worst_orth = 0.0f64;
    let mut worst_det = 0.0f64;
    for _ in 0..1000 {
        let (a, b, c) = (
            r.gen_range(-360.0..360.0),
            r.gen_range(-180.0..180.0),
            r.gen_range(-180.0..180.0),
        );
        let m = compose(RotationAngles::new(a, b, c));
        // RᵀR computed here rather than through the library
        let mut dev = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| m.0[k][i] * m.0[k][j]).sum();
                dev = dev.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst_orth = worst_orth.max(dev);
        worst_det = worst_det.max((m.determinant() - 1.0).abs());
        ensure(m.0 == brute_compose(a, b, c), || {
            format!("compose({a}, {b}, {c}) differs from the triple product")
        })?;
    }
    ensure(worst_orth < 1e-12, || {
        format!("max |RᵀR − I| = {worst_orth:e}")
    })?;
    ensure(worst_det < 1e-12, || {
        format!("max |det − 1| = {worst_det:e}")
    })?;
    Ok(format!(
        "1000 triples, max |RᵀR−I| {worst_orth:.1e}, max |det−1| {worst_det:.1e}, exact product match"
    ))
}

fn ac4_yaw_shift() -> Outcome {
    let mut r = rng(4);
    let dims = ImageDims::new(512, 1024).unwrap();
    let data = (0..dims.pixel_count())
        .map(|_| r.gen_range(0..20u8))
        .collect();
    let lbl = LabelMap::new(dims, data, 255).unwrap();
    for k in [1usize, 7, 256, 512] {
        let out = rotate_labels(&lbl, &rot_z(360.0 * k as f64 / 1024.0));
        let expected = shift_columns(&lbl, k);
        let mismatches = out
            .data()
            .iter()
            .zip(&expected)
            .filter(|(a, b)| a != b)
            .count();
        ensure(mismatches == 0, || {
            format!("k = {k}: {mismatches} pixels differ")
        })?;
    }
    Ok("k ∈ {1, 7, 256, 512} bit-exact".into())
}

fn ac5_round_trip() -> Outcome {
    let mut r = rng(5);
    let rot = compose(RotationAngles::new(180.0, 5.0, 5.0));
    let back = inverse(&rot);
    let mut worst = 1.0f64;
    for block in [32usize, 48, 64] {
        let lbl = block_labels(512, 1024, block, 13, &mut r);
        let round = rotate_labels(&rotate_labels(&lbl, &rot), &back);
        let agree = lbl
            .data()
            .iter()
            .zip(round.data())
            .filter(|(a, b)| a == b)
            .count();
        let frac = agree as f64 / lbl.data().len() as f64;
        worst = worst.min(frac);
        ensure(frac >= 0.95, || {
            format!("block {block}: agreement {frac:.4} < 0.95")
        })?;
    }
    Ok(format!("worst agreement {:.4} (blocks 32/48/64)", worst))
}

fn ac6_weights() -> Outcome {
    for h in [2usize, 3, 512, 513] {
        let wm = weight_map(ImageDims::new(h, 2 * h).unwrap());
        for m in 1..=h {
            let offset = (2 * m as i64 - h as i64).abs() as f64;
            let closed = (offset / h as f64 * std::f64::consts::PI / 2.0).cos();
            let got = wm.row(m - 1);
            ensure((got - closed).abs() <= 1e-12, || {
                format!("H={h} m={m}: {got} vs closed form {closed}")
            })?;
        }
        if h % 2 == 0 {
            ensure(wm.row(h / 2 - 1) == 1.0, || {
                format!("H={h}: midline weight {}", wm.row(h / 2 - 1))
            })?;
        }
        ensure(wm.row(h - 1) == 0.0, || {
            format!("H={h}: bottom weight {}", wm.row(h - 1))
        })?;
        for m in 1..h {
            ensure(row_weight(m, h) == row_weight(h - m, h), || {
                format!("H={h}: weight({m}) != weight({})", h - m)
            })?;
        }
    }
    Ok("H ∈ {2, 3, 512, 513}: closed form, midline 1, bottom 0, symmetric".into())
}

fn ac7_sdpe_gradients() -> Outcome {
    let mut r = rng(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let g = PatchGrid::new(
            r.gen_range(1..=4),
            r.gen_range(1..=6),
            r.gen_range(1..=4),
            4.0,
        )
        .unwrap();
        let f = random_field(g, &mut r);
        let x = f.data();
        let fd_intra = central_differences(|d| brute_intra(&g, d), x, 1e-4);
        let fd_inter = central_differences(|d| brute_inter(&g, d), x, 1e-4);
        let fd_total: Vec<f64> = fd_intra.iter().zip(&fd_inter).map(|(a, b)| a + b).collect();
        for (name, analytic, fd) in [
            ("intra", intra_loss(&f).grad, &fd_intra),
            ("inter", inter_loss(&f).grad, &fd_inter),
            ("sdpe", sdpe_loss(&f).grad, &fd_total),
        ] {
            let e = max_relative_error(analytic.data(), fd);
            worst = worst.max(e);
            ensure(e < 1e-6, || {
                format!("{name} on {g:?}: relative error {e:e}")
            })?;
        }

        // mirror-symmetric: (Δ + mirror Δ) / 2 is a fixed point of the mirror
        let m = mirror_offsets(&f);
        let sym: Vec<f64> = x.iter().zip(m.data()).map(|(a, b)| 0.5 * (a + b)).collect();
        let sym = OffsetField::new(g, sym).unwrap();
        let v = intra_loss(&sym).value;
        ensure(v == 0.0, || {
            format!("intra loss of symmetric field = {v:e}")
        })?;

        // row-constant: copy patch column 0 across every column
        let mut rc = f.clone();
        let s = g.patch_size();
        for mm in 0..g.rows() {
            for n in 0..g.cols() {
                for i in 0..s {
                    for j in 0..s {
                        rc.set(mm, n, i, j, f.get(mm, 0, i, j));
                    }
                }
            }
        }
        let v = inter_loss(&rc).value;
        ensure(v == 0.0, || {
            format!("inter loss of row-constant field = {v:e}")
        })?;
    }
    Ok(format!("100 fields, worst relative error {worst:.1e}"))
}

fn ac8_metrics_oracle() -> Outcome {
    let mut r = rng(8);
    let dims = ImageDims::new(16, 32).unwrap();
    for t in 0..1000 {
        let classes = r.gen_range(1..=5usize);
        let draw = |r: &mut rand_chacha::ChaCha8Rng| -> u8 {
            if r.gen_bool(0.1) {
                255
            } else {
                r.gen_range(0..classes as u8)
            }
        };
        let gt: Vec<u8> = (0..dims.pixel_count()).map(|_| draw(&mut r)).collect();
        let pred: Vec<u8> = (0..dims.pixel_count())
            .map(|_| r.gen_range(0..classes as u8))
            .collect();
        let gt_map = LabelMap::new(dims, gt.clone(), 255).unwrap();
        let pred_map = LabelMap::new(dims, pred.clone(), 255).unwrap();
        let cm: ConfusionMatrix = panosga::accumulate(&pred_map, &gt_map, classes).unwrap();
        let oracle = brute_metrics(&pred, &gt, classes, 255);
        ensure(cm.iou_per_class() == oracle.iou, || {
            format!("trial {t}: per-class IoU differs")
        })?;
        ensure(cm.miou().unwrap() == oracle.miou, || {
            format!("trial {t}: mIoU differs")
        })?;
        ensure(cm.pixel_accuracy().unwrap() == oracle.pacc, || {
            format!("trial {t}: PAcc differs")
        })?;
    }
    Ok("1000 random pairs, exact agreement".into())
}

fn write_dataset(root: &Path, n: usize, h: usize, w: usize) -> (DatasetManifest, Vec<LabelMap>) {
    let mut r = rng(9);
    std::fs::create_dir_all(root.join("img")).unwrap();
    std::fs::create_dir_all(root.join("lbl")).unwrap();
    let mut entries = Vec::new();
    let mut gts = Vec::new();
    for k in 0..n {
        let lbl = block_labels(h, w, 8, 4, &mut r);
        let id = format!("sample{k:02}");
        save_image(&image_from_labels(&lbl), root.join(format!("img/{id}.png"))).unwrap();
        save_labels(&lbl, root.join(format!("lbl/{id}.png"))).unwrap();
        entries.push(ManifestEntry {
            sample_id: id.clone(),
            image_path: format!("img/{id}.png").into(),
            label_path: format!("lbl/{id}.png").into(),
        });
        gts.push(lbl);
    }
    let manifest = DatasetManifest {
        entries,
        num_classes: 4,
        ignore_id: 255,
        base_dir: root.to_path_buf(),
    };
    manifest.save(root.join("manifest.json")).unwrap();
    (
        DatasetManifest::load(root.join("manifest.json")).unwrap(),
        gts,
    )
}

fn ac9_oracle_validation() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (manifest, gts) = write_dataset(&tmp.path().join("data"), 10, 64, 128);
    let dataset = manifest.load_dataset().map_err(|e| e.to_string())?;
    let grid = build_grid(&GridSpec::default()).map_err(|e| e.to_string())?;
    ensure(grid.len() == 16, || {
        format!("grid has {} situations", grid.len())
    })?;

    let oracle_dir = tmp.path().join("oracle");
    let blind_dir = tmp.path().join("blind");
    for s in grid.situations() {
        let r = compose(s.angles);
        for (entry, gt) in manifest.entries.iter().zip(&gts) {
            for (dir, lbl) in [
                (&oracle_dir, rotate_labels(gt, &r)),
                (&blind_dir, gt.clone()),
            ] {
                let path = DirPredictor::path_for(dir, s.index, &entry.sample_id);
                std::fs::create_dir_all(path.parent().unwrap()).unwrap();
                save_labels(&lbl, path).unwrap();
            }
        }
    }

    let oracle = aggregate(run_validation(
        &dataset,
        &DirPredictor::new(&oracle_dir),
        &grid,
    ))
    .map_err(|e| e.to_string())?;
    ensure(!oracle.has_failures(), || {
        format!("failed situations {:?}", oracle.failed)
    })?;
    ensure(oracle.mean.miou == 1.0, || {
        format!("oracle mean mIoU {}", oracle.mean.miou)
    })?;
    ensure(oracle.variance.miou == 0.0, || {
        format!("oracle variance {}", oracle.variance.miou)
    })?;
    ensure(oracle.range.miou == 0.0, || {
        format!("oracle range {}", oracle.range.miou)
    })?;

    let blind = aggregate(run_validation(
        &dataset,
        &DirPredictor::new(&blind_dir),
        &grid,
    ))
    .map_err(|e| e.to_string())?;
    ensure(blind.variance.miou > 0.0, || {
        "rotation-blind variance is 0".into()
    })?;
    Ok(format!(
        "oracle mean 1.0 / var 0 / range 0; rotation-blind var {:.4}",
        blind.variance.miou
    ))
}

fn ac10_augmentation_stats() -> Outcome {
    let cfg = AugmentationConfig::default();
    let mut r = rng(10);
    let draws: Vec<_> = (0..10_000)
        .map(|_| sample_augmentation(&cfg, &mut r))
        .collect();
    let applied: Vec<_> = draws.iter().filter(|d| d.applied).collect();
    let frac = applied.len() as f64 / draws.len() as f64;
    within("applied fraction", frac, 0.5, 0.02)?;
    let n = applied.len() as f64;
    let yaw = applied.iter().map(|d| d.angles.yaw).sum::<f64>() / n;
    let pitch = applied.iter().map(|d| d.angles.pitch).sum::<f64>() / n;
    let roll = applied.iter().map(|d| d.angles.roll).sum::<f64>() / n;
    within("mean yaw", yaw, 180.0, 5.0)?;
    within("mean pitch", pitch, 5.0, 0.3)?;
    within("mean roll", roll, 5.0, 0.3)?;
    Ok(format!(
        "applied {frac:.4}, mean yaw {yaw:.2}, pitch {pitch:.3}, roll {roll:.3}"
    ))
}

fn main() {
    // silence "unused" for helpers only some criteria use
    let _ = (rot_x(0.0), rot_y(0.0), RotMat::IDENTITY);

    type Criterion = (&'static str, &'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        (
            "AC1",
            "table aggregates",
            Duration::from_secs(1),
            ac1_table_aggregates,
        ),
        (
            "AC3",
            "rotation algebra",
            Duration::from_secs(1),
            ac3_rotation_algebra,
        ),
        (
            "AC4",
            "yaw/column-shift equivalence",
            Duration::from_secs(1),
            ac4_yaw_shift,
        ),
        (
            "AC5",
            "round-trip resampling",
            Duration::from_secs(2),
            ac5_round_trip,
        ),
        (
            "AC6",
            "panorama weights",
            Duration::from_secs(1),
            ac6_weights,
        ),
        (
            "AC7",
            "SDPE gradients",
            Duration::from_secs(5),
            ac7_sdpe_gradients,
        ),
        (
            "AC8",
            "metrics oracle",
            Duration::from_secs(5),
            ac8_metrics_oracle,
        ),
        (
            "AC9",
            "oracle SGA validation",
            Duration::from_secs(10),
            ac9_oracle_validation,
        ),
        (
            "AC10",
            "augmentation statistics",
            Duration::from_secs(1),
            ac10_augmentation_stats,
        ),
    ];

    println!("AC2  SKIP trained-network absolute numbers: out of scope (needs trained backbone and dataset)");
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => {
                Err(format!("{detail}; took {elapsed:.2?}, budget {budget:.0?}"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("{id:<4} PASS {name}: {detail} [{elapsed:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("{id:<4} FAIL {name}: {why} [{elapsed:.2?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
