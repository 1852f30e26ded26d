use std::sync::Arc;

use dmimo::dataset::{generate_synthetic_dataset, GridSpec};
use dmimo::geometry::{los_channel, AmplitudeModel, ArrayGeometry, LosChannelParams, Point3};
use dmimo::precoders::{ChannelMatrix, PrecoderEntry};
use dmimo::scenarios::{
    cluster_users, run_scenario, run_trial, noise_reference, trial_channels, ChannelSource, DatasetChannels,
    PrecoderOutcome, ScenarioConfig,
};
use dmimo::{Error, ErrorClass};

const PAIRS: [[usize; 2]; 4] = [[0, 1], [2, 3], [4, 5], [6, 7]];

fn pairs() -> Vec<Vec<usize>> {
    PAIRS.iter().map(|p| p.to_vec()).collect()
}

#[test]
fn clustering_scenario_runs_the_comparison_set() {
    let mut cfg = ScenarioConfig::synthetic(10, 40, &["RZF", "ZF_nf", "RZF_nf", "nf_nf"], 8).unwrap();
    cfg.ue_region = dmimo::Region::new(Point3::new(0.5, 0.5, 0.0), Point3::new(5.5, 5.5, 0.0)).unwrap();
    cfg.clustering = Some(pairs());
    let run = run_scenario(&cfg).unwrap();
    for t in &run.trials {
        let clusters = t.points[0].clusters.as_ref().unwrap();
        assert_eq!(clusters.len(), 10);
        assert!(clusters.iter().all(|&c| c < 4));
    }
    let rzf_nf = run.summary.row("RZF_nf", None).unwrap();
    assert_eq!(rzf_nf.failures, 0);
    assert_eq!(rzf_nf.samples, 400);
    let nf = run.summary.row("nf_nf", None).unwrap();
    assert!(rzf_nf.median_db.unwrap() > nf.median_db.unwrap());
}

#[test]
fn gain_clusters_form_contiguous_regions() {
    let g = ArrayGeometry::default_testbed();
    let params = LosChannelParams::new(g.wavelength(), AmplitudeModel::FreeSpace);
    let n = 25;
    let coord = |i: usize| 0.4 + 5.2 * i as f64 / (n - 1) as f64;
    let mut label = vec![vec![0usize; n]; n];
    for (i, row) in label.iter_mut().enumerate() {
        let cols: Vec<_> = (0..n)
            .map(|j| los_channel(&g, &Point3::new(coord(i), coord(j), 0.0), &params).unwrap())
            .collect();
        let a = cluster_users(&ChannelMatrix::from_columns(&cols).unwrap(), &g, &pairs()).unwrap();
        row.copy_from_slice(&a.ue_to_group);
    }
    // Every pair's region is one 4-connected component.
    for pair in 0..4 {
        let cells: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| label[i][j] == pair)
            .collect();
        assert!(!cells.is_empty(), "pair {pair} owns no cell");
        let mut seen = vec![vec![false; n]; n];
        let mut stack = vec![cells[0]];
        seen[cells[0].0][cells[0].1] = true;
        let mut reached = 0;
        while let Some((i, j)) = stack.pop() {
            reached += 1;
            let neighbours = [(i.wrapping_sub(1), j), (i + 1, j), (i, j.wrapping_sub(1)), (i, j + 1)];
            for (a, b) in neighbours {
                if a < n && b < n && !seen[a][b] && label[a][b] == pair {
                    seen[a][b] = true;
                    stack.push((a, b));
                }
            }
        }
        assert_eq!(reached, cells.len(), "pair {pair} region is split");
    }
}

#[test]
fn nmse_grid_gives_one_row_per_point() {
    let mut cfg = ScenarioConfig::synthetic(10, 30, &["DIS_RZF", "DIS_RMRT_nf", "nf_nf"], 6).unwrap();
    cfg.nmse_grid = Some(vec![0.0, 0.05, 0.1, 0.2]);
    let run = run_scenario(&cfg).unwrap();
    assert_eq!(run.summary.rows.len(), 12);
    for v in [0.05, 0.1, 0.2] {
        let row = run.summary.row("DIS_RZF", Some(v)).unwrap();
        let realized = row.mean_realized_nmse.unwrap();
        assert!((realized / v - 1.0).abs() < 0.1, "{v}: {realized}");
    }
}

#[test]
fn same_seed_same_summary() {
    let cfg = ScenarioConfig::synthetic(5, 50, &["ZF", "MRT_nf", "near_field"], 77).unwrap();
    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&cfg).unwrap();
    assert_eq!(a.summary, b.summary);
    assert_eq!(a.trials, b.trials);
}

#[test]
fn ungranted_csi_is_rejected_before_any_trial() {
    let mut cfg = ScenarioConfig::synthetic(5, 1_000_000, &["MRT"], 1).unwrap();
    let mut entry = PrecoderEntry::named("nf_nf").unwrap();
    entry.spec.suppression = dmimo::precoders::Suppression::Csi;
    cfg.precoders.push(entry);
    let err = run_scenario(&cfg).unwrap_err();
    assert!(matches!(err, Error::NotGranted(_)));
    assert_eq!(err.class(), ErrorClass::Config);
}

#[test]
fn failures_are_recorded_not_raised() {
    let cfg = ScenarioConfig::synthetic(10, 5, &["DIS_MRT_nf", "MRT"], 2).unwrap();
    let run = run_scenario(&cfg).unwrap();
    let row = run.summary.row("DIS_MRT_nf", None).unwrap();
    assert_eq!((row.failures, row.samples, row.failure_rate), (5, 0, 1.0));
    assert_eq!(row.median_db, None);
    assert!(matches!(run.trials[0].points[0].outcomes[0], PrecoderOutcome::Failed(_)));
    assert_eq!(run.summary.row("MRT", None).unwrap().samples, 50);
}

#[test]
fn dataset_source_uses_measured_columns() {
    let geometry = ArrayGeometry::default_testbed();
    let spec = GridSpec {
        x: [1.5, 4.5],
        y: [1.5, 4.5],
        nx: 16,
        ny: 16,
        z: 0.0,
    };
    let params = LosChannelParams::new(geometry.wavelength(), AmplitudeModel::FreeSpace);
    let (grid, _, _) = generate_synthetic_dataset(&geometry, &spec, 1, &params, None).unwrap();
    let mut cfg = ScenarioConfig::synthetic(5, 10, &["ZF", "nf_nf"], 4).unwrap();
    cfg.channel_source = ChannelSource::Dataset(Arc::new(DatasetChannels { grid: grid.clone(), tx: 0 }));
    cfg.validate().unwrap();
    let (positions, h) = trial_channels(&cfg, 3).unwrap();
    for (k, p) in positions.iter().enumerate() {
        let idx = grid.nearest_point(p).unwrap();
        assert_eq!(grid.points()[idx].position(), *p);
        let expected = los_channel(&geometry, p, &params).unwrap();
        assert!((h.column(k) - expected).norm() < 1e-15);
    }
    let noise = noise_reference(&cfg).unwrap();
    let r = run_trial(&cfg, &noise, 3).unwrap();
    assert_eq!(r.positions, positions);
}

#[test]
fn distributed_regularization_beats_plain_zero_forcing() {
    let cfg = ScenarioConfig::synthetic(5, 300, &["DIS_ZF", "DIS_RZF"], 12).unwrap();
    let run = run_scenario(&cfg).unwrap();
    let zf = run.summary.row("DIS_ZF", None).unwrap().median_db.unwrap();
    let rzf = run.summary.row("DIS_RZF", None).unwrap().median_db.unwrap();
    assert!(rzf >= zf, "DIS_RZF {rzf} < DIS_ZF {zf}");
}
