//! Acceptance gate: every release-blocking property, one test per criterion,
//! each printing a single PASS line with the measured values (run with
//! `--nocapture` to see them). Tolerances are pinned here and nowhere else.

use motifconv::enumerate::{brute_force_instances, enumerate_instances, enumerate_triangles};
use motifconv::features::build_joint_features;
use motifconv::graph::{Edge, HeteroGraph, TypeSet};
use motifconv::labels::{stratified_split, LabelSet, TaskKind};
use motifconv::linalg::{gemm, row_scale, spmm, DenseMatrix};
use motifconv::motif::{Motif, MotifNodeType};
use motifconv::nn::attention::attention_combine;
use motifconv::nn::conv::{conv_unit_forward, reference_instance_conv, relu, ConvParams};
use motifconv::nn::gradcheck::grad_check;
use motifconv::nn::init::glorot_uniform;
use motifconv::nn::model::{model_forward, Mode, Model};
use motifconv::synth::{planted_hetero, sbm_homo, PlantedConfig, SbmConfig};
use motifconv::tensor::MotifTensor;
use motifconv::train::{train, TrainConfig, TrainData};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> HeteroGraph {
    let n = rng.gen_range(4..=max_nodes);
    let type_count = rng.gen_range(1..=3usize);
    let mut types = TypeSet::new();
    for name in ["X", "Y", "Z"].iter().take(type_count) {
        types.intern(name);
    }
    let node_types = (0..n).map(|_| rng.gen_range(0..type_count) as u32).collect();
    let target_edges = rng.gen_range(n..=3 * n);
    let mut edges: Vec<Edge> = Vec::new();
    let mut occupied = std::collections::BTreeSet::new();
    for _ in 0..10 * target_edges {
        if edges.len() >= target_edges {
            break;
        }
        let u = rng.gen_range(0..n) as u32;
        let v = rng.gen_range(0..n) as u32;
        if u == v {
            continue;
        }
        let directed = rng.gen_bool(0.4);
        // Mirror the graph's duplicate rule: an undirected edge occupies both
        // orientations, a directed edge only its own.
        if occupied.contains(&(u, v)) || (!directed && occupied.contains(&(v, u))) {
            continue;
        }
        occupied.insert((u, v));
        if !directed {
            occupied.insert((v, u));
        }
        edges.push(Edge { src: u, dst: v, directed });
    }
    HeteroGraph::new(types, node_types, edges).expect("valid random graph")
}

/// Structural templates for every ≤3-node motif shape; node types are filled
/// in per graph, mixing wildcards and concrete types.
const TEMPLATES: &[(&[(u8, u8, bool)], u8, u8)] = &[
    (&[(0, 1, false)], 0, 1),
    (&[(0, 1, true)], 0, 1),
    (&[(0, 1, true)], 1, 0),
    (&[(0, 1, false), (1, 2, false)], 0, 2),
    (&[(0, 1, false), (1, 2, false)], 1, 0),
    (&[(0, 1, true), (1, 2, true)], 0, 2),
    (&[(0, 1, false), (1, 2, true)], 2, 0),
    (&[(0, 1, false), (1, 2, false), (0, 2, false)], 0, 1),
    (&[(0, 1, true), (1, 2, true), (2, 0, true)], 0, 1),
    (&[(0, 1, true), (1, 2, false), (0, 2, false)], 0, 2),
];

fn motif_catalog(g: &HeteroGraph, rng: &mut ChaCha8Rng) -> Vec<Motif> {
    let names = g.types().names();
    TEMPLATES
        .iter()
        .map(|&(edges, target, context)| {
            let positions = edges.iter().flat_map(|&(a, b, _)| [a, b]).max().unwrap() + 1;
            let node_types = (0..positions)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        MotifNodeType::Any
                    } else {
                        MotifNodeType::Named(names[rng.gen_range(0..names.len())].clone())
                    }
                })
                .collect();
            Motif::new(node_types, edges.to_vec(), target, context, None)
                .expect("template motifs are valid")
        })
        .collect()
}

fn sorted(mut v: Vec<motifconv::enumerate::MotifInstance>) -> Vec<motifconv::enumerate::MotifInstance> {
    v.sort_unstable_by(|a, b| (a.target, &a.assignment).cmp(&(b.target, &b.assignment)));
    v
}

fn random_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    m
}

#[test]
fn criterion_01_enumeration_matches_brute_force() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut motifs_checked = 0usize;
    let mut instances_seen = 0usize;
    for _ in 0..50 {
        let g = random_graph(&mut rng, 30);
        for motif in motif_catalog(&g, &mut rng) {
            let fast = sorted(enumerate_instances(&g, &motif, None));
            let oracle = sorted(brute_force_instances(&g, &motif).unwrap());
            assert_eq!(
                fast, oracle,
                "enumeration disagrees with brute force on motif {}",
                motif.signature()
            );
            motifs_checked += 1;
            instances_seen += fast.len();
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "enumeration oracle sweep took {elapsed:.1}s");
    println!(
        "criterion 1 enumeration oracle: PASS \
         (50 graphs, {motifs_checked} motif runs, {instances_seen} instances, {elapsed:.2}s)"
    );
}

#[test]
fn criterion_02_tensor_matches_instance_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut checked = 0usize;
    for _ in 0..20 {
        let g = random_graph(&mut rng, 24);
        for motif in motif_catalog(&g, &mut rng) {
            let built = MotifTensor::build(&g, &motif).unwrap();
            let oracle_instances = brute_force_instances(&g, &motif).unwrap();
            let oracle = MotifTensor::from_instances(&g, &motif, &oracle_instances);
            assert_eq!(built.role_count(), oracle.role_count());
            assert_eq!(built.instance_counts(), oracle.instance_counts());
            for k in 1..=built.role_count() {
                let a: Vec<_> = built.role_matrix(k as u8).iter_entries().collect();
                let b: Vec<_> = oracle.role_matrix(k as u8).iter_entries().collect();
                assert_eq!(a, b, "role {k} differs for {}", motif.signature());
            }
            // Row-sum identity: every instance contributes one count per
            // non-target position.
            let positions = (motif.node_count() - 1) as f64;
            for i in 0..g.node_count() {
                let total: f64 = (1..=built.role_count())
                    .map(|k| {
                        built
                            .role_matrix(k as u8)
                            .row_entries(i)
                            .map(|(_, v)| v)
                            .sum::<f64>()
                    })
                    .sum();
                assert_eq!(
                    total,
                    built.instance_counts()[i] * positions,
                    "row-sum identity fails at node {i} for {}",
                    motif.signature()
                );
            }
            checked += 1;
        }
    }
    println!("criterion 2 tensor vs instance definition: PASS ({checked} tensors, exact)");
}

#[test]
fn criterion_03_conv_unit_matches_instance_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let g = random_graph(&mut rng, 16);
        let catalog = motif_catalog(&g, &mut rng);
        let motif = &catalog[trial % catalog.len()];
        let tensor = MotifTensor::build(&g, motif).unwrap();
        let d = rng.gen_range(2..=5);
        let f = rng.gen_range(1..=4);
        let x = random_dense(&mut rng, g.node_count(), d);
        let params = ConvParams {
            w: (0..=tensor.role_count())
                .map(|_| glorot_uniform(d, f, &mut rng))
                .collect(),
        };
        let (unit_out, _) = conv_unit_forward(&x, &tensor, &params, true).unwrap();
        let instances = enumerate_instances(&g, motif, None);
        let reference = reference_instance_conv(motif, &instances, &params, &x);
        worst = worst.max(unit_out.max_abs_diff(&reference));
    }
    assert!(worst < 1e-10, "conv unit deviates from reference by {worst:e}");
    println!("criterion 3 conv unit vs per-instance reference: PASS (20 triples, max dev {worst:.2e})");
}

#[test]
fn criterion_04_gradients_match_finite_differences() {
    let started = Instant::now();
    // Same fixed problem the gradcheck command runs: a 15-node two-block
    // graph, edge + wedge motifs, 3 layers, checked under both heads.
    let ds = sbm_homo(&SbmConfig {
        nodes: 15,
        p_in: 0.6,
        p_out: 0.25,
        feature_noise: 0.3,
        seed: 0,
    })
    .unwrap();
    let x = build_joint_features(&ds.graph, &ds.features).unwrap();
    let motifs = [Motif::edge_any(), Motif::wedge_any()];
    let tensors: Vec<MotifTensor> = motifs
        .iter()
        .map(|m| MotifTensor::build(&ds.graph, m).unwrap())
        .collect();
    let role_counts: Vec<usize> = tensors.iter().map(|t| t.role_count()).collect();
    let mask: Vec<u32> = (0..15).collect();

    let multiclass = ds.labels.as_ref().unwrap();
    let model = Model::init(x.cols(), 6, 2, 3, &role_counts, 1).unwrap();
    let ce = grad_check(&model, &x, &tensors, multiclass, &mask, 1e-6, 1).unwrap();
    for g in &ce.groups {
        assert!(
            g.max_rel_err < 1e-5,
            "softmax-CE head, group {} rel err {:.3e}",
            g.name,
            g.max_rel_err
        );
    }

    let multilabel = LabelSet::new(
        TaskKind::MultiLabel { classes: 3 },
        (0..15u32)
            .map(|v| {
                let mut cs = vec![v % 2];
                if v % 3 == 0 {
                    cs.push(2);
                }
                (v, cs)
            })
            .collect(),
    )
    .unwrap();
    let model = Model::init(x.cols(), 6, 3, 3, &role_counts, 2).unwrap();
    let bce = grad_check(&model, &x, &tensors, &multilabel, &mask, 1e-6, 1).unwrap();
    for g in &bce.groups {
        assert!(
            g.max_rel_err < 1e-5,
            "binary-CE head, group {} rel err {:.3e}",
            g.name,
            g.max_rel_err
        );
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "gradient check took {elapsed:.1}s");
    println!(
        "criterion 4 gradient exactness: PASS \
         (worst rel err CE {:.2e}, BCE {:.2e}, {elapsed:.1}s)",
        ce.max_rel_err, bce.max_rel_err
    );
}

#[test]
fn criterion_05_edge_motif_layer_is_gcn() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for _ in 0..5 {
        let g = random_graph(&mut rng, 25);
        let tensor = MotifTensor::build(&g, &Motif::edge_any()).unwrap();
        let d = 4;
        let x = random_dense(&mut rng, g.node_count(), d);
        let params = ConvParams {
            w: vec![glorot_uniform(d, 3, &mut rng), glorot_uniform(d, 3, &mut rng)],
        };
        let (unit_out, _) = conv_unit_forward(&x, &tensor, &params, true).unwrap();

        // sigma(X W_0 + D^{-1} A X W_1), evaluated directly.
        let mut pre = gemm(&x, &params.w[0]).unwrap();
        let axw = spmm(tensor.role_matrix(1), &gemm(&x, &params.w[1]).unwrap()).unwrap();
        pre.add_assign(&row_scale(&tensor.inverse_counts(), &axw).unwrap());
        let direct = relu(&pre);

        let bitwise_equal = unit_out
            .data()
            .iter()
            .zip(direct.data())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(bitwise_equal, "edge-motif layer deviates from the GCN formula");
    }
    println!("criterion 5 GCN reduction: PASS (5 graphs, bit-for-bit)");
}

#[test]
fn criterion_06_attention_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (n, f, u) = (40, 8, 4);
    let hs_owned: Vec<DenseMatrix> = (0..u).map(|_| random_dense(&mut rng, n, f)).collect();
    let hs: Vec<&DenseMatrix> = hs_owned.iter().collect();
    let z: Vec<Vec<f64>> = (0..u)
        .map(|_| (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();

    let (_, alpha) = attention_combine(&hs, &z).unwrap();
    let mut worst_sum: f64 = 0.0;
    for i in 0..n {
        let s: f64 = alpha.row(i).iter().sum();
        assert!(alpha.row(i).iter().all(|&a| a >= 0.0));
        worst_sum = worst_sum.max((s - 1.0).abs());
    }
    assert!(worst_sum < 1e-12, "alpha rows sum off by {worst_sum:e}");

    let (single_out, _) = attention_combine(&hs[..1], &z[..1]).unwrap();
    assert!(
        single_out
            .data()
            .iter()
            .zip(hs_owned[0].data())
            .all(|(a, b)| a.to_bits() == b.to_bits()),
        "single-motif attention is not a passthrough"
    );

    let zeros: Vec<Vec<f64>> = vec![vec![0.0; f]; u];
    let (mean_out, _) = attention_combine(&hs, &zeros).unwrap();
    let mut expected = DenseMatrix::zeros(n, f);
    for h in &hs_owned {
        expected.add_assign(h);
    }
    for v in expected.data_mut() {
        *v /= u as f64;
    }
    let dev = mean_out.max_abs_diff(&expected);
    assert!(dev < 1e-12, "zero-z attention deviates from the mean by {dev:e}");
    println!(
        "criterion 6 attention properties: PASS \
         (row-sum dev {worst_sum:.2e}, U=1 bitwise, zero-z mean dev {dev:.2e})"
    );
}

fn planted_run(use_wedge: bool) -> f64 {
    let ds = planted_hetero(&PlantedConfig::default()).unwrap();
    let x = build_joint_features(&ds.graph, &ds.features).unwrap();
    let labels = ds.labels.as_ref().unwrap();

    let apv_wedge = Motif::new(
        vec![
            MotifNodeType::Named("A".into()),
            MotifNodeType::Named("P".into()),
            MotifNodeType::Named("V".into()),
        ],
        vec![(0, 1, false), (1, 2, false)],
        0,
        2,
        None,
    )
    .unwrap();
    let mut motifs = vec![Motif::edge_any()];
    if use_wedge {
        motifs.insert(0, apv_wedge);
    }
    let tensors: Vec<MotifTensor> = motifs
        .iter()
        .map(|m| MotifTensor::build(&ds.graph, m).unwrap())
        .collect();
    let role_counts: Vec<usize> = tensors.iter().map(|t| t.role_count()).collect();

    let split = stratified_split(labels, 0.1, 0.1, 0).unwrap();
    let cfg = TrainConfig {
        layers: 2,
        ..TrainConfig::default()
    };
    let model = Model::init(x.cols(), cfg.filters, labels.task().class_count(), cfg.layers, &role_counts, 1).unwrap();
    let data = TrainData {
        features: &x,
        tensors: &tensors,
        labels,
        split: &split,
    };
    let (_, report) = train(model, &data, &cfg).unwrap();
    report.test_metrics.expect("split has test nodes").accuracy
}

#[test]
fn criterion_07_wedge_motif_beats_edge_baseline() {
    let started = Instant::now();
    let with_wedge = planted_run(true);
    let edge_only = planted_run(false);
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        with_wedge >= 0.85,
        "wedge+edge test accuracy {with_wedge:.4} below 0.85"
    );
    assert!(
        with_wedge - edge_only >= 0.10,
        "wedge+edge {with_wedge:.4} does not lead edge-only {edge_only:.4} by 0.10"
    );
    assert!(elapsed < 120.0, "planted experiment took {elapsed:.1}s");
    println!(
        "criterion 7 planted-hetero experiment: PASS \
         (wedge+edge {with_wedge:.4}, edge-only {edge_only:.4}, {elapsed:.1}s)"
    );
}

#[test]
fn criterion_08_permutation_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let g = random_graph(&mut rng, 20);
        let n = g.node_count();
        let motifs = [Motif::edge_any(), Motif::wedge_any()];
        let tensors: Vec<MotifTensor> = motifs
            .iter()
            .map(|m| MotifTensor::build(&g, m).unwrap())
            .collect();
        let role_counts: Vec<usize> = tensors.iter().map(|t| t.role_count()).collect();
        let d = 5;
        let x = random_dense(&mut rng, n, d);
        let model = Model::init(d, 6, 3, 2, &role_counts, rng.gen()).unwrap();
        let (logits, _) = model_forward(&model, &x, &tensors, Mode::Eval).unwrap();

        let mut perm: Vec<u32> = (0..n as u32).collect();
        perm.shuffle(&mut rng);
        let mut perm_types = vec![0u32; n];
        let mut x_perm = DenseMatrix::zeros(n, d);
        for v in 0..n {
            perm_types[perm[v] as usize] = g.node_type(v as u32);
            x_perm.row_mut(perm[v] as usize).copy_from_slice(x.row(v));
        }
        let edges_perm = g
            .edges()
            .iter()
            .map(|e| Edge {
                src: perm[e.src as usize],
                dst: perm[e.dst as usize],
                directed: e.directed,
            })
            .collect();
        let g_perm = HeteroGraph::new(g.types().clone(), perm_types, edges_perm).unwrap();
        let tensors_perm: Vec<MotifTensor> = motifs
            .iter()
            .map(|m| MotifTensor::build(&g_perm, m).unwrap())
            .collect();
        let (logits_perm, _) = model_forward(&model, &x_perm, &tensors_perm, Mode::Eval).unwrap();

        for v in 0..n {
            for (a, b) in logits.row(v).iter().zip(logits_perm.row(perm[v] as usize)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    assert!(worst < 1e-10, "permutation equivariance deviation {worst:e}");
    println!("criterion 8 permutation equivariance: PASS (5 graphs, max dev {worst:.2e})");
}

#[test]
fn criterion_09_triangle_enumeration_scales() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let n = 20_000usize;
    let target = 100_000usize;
    let mut occupied = std::collections::BTreeSet::new();
    let mut edges: Vec<Edge> = Vec::new();
    while edges.len() < target {
        let u = rng.gen_range(0..n) as u32;
        let v = rng.gen_range(0..n) as u32;
        if u == v {
            continue;
        }
        let directed = rng.gen_bool(0.2);
        if occupied.contains(&(u, v)) || (!directed && occupied.contains(&(v, u))) {
            continue;
        }
        occupied.insert((u, v));
        if !directed {
            occupied.insert((v, u));
        }
        edges.push(Edge { src: u, dst: v, directed });
    }
    let g = HeteroGraph::homogeneous(n, edges).unwrap();
    let motif = Motif::triangle_any();

    let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let started = Instant::now();
    let single = pool1.install(|| enumerate_triangles(&g, &motif));
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "single-threaded triangle enumeration took {elapsed:.2}s");

    let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let multi = pool4.install(|| enumerate_triangles(&g, &motif));
    assert_eq!(single, multi, "thread count changed the enumeration output");
    println!(
        "criterion 9 triangle performance: PASS \
         ({} instances on 1e5 edges in {elapsed:.2}s single-threaded, multi identical)",
        single.len()
    );
}

#[test]
fn criterion_10_training_is_deterministic() {
    let run = || {
        let ds = planted_hetero(&PlantedConfig {
            authors: 60,
            venues: 12,
            ..PlantedConfig::default()
        })
        .unwrap();
        let x = build_joint_features(&ds.graph, &ds.features).unwrap();
        let tensors = vec![MotifTensor::build(&ds.graph, &Motif::edge_any()).unwrap()];
        let labels = ds.labels.as_ref().unwrap().clone();
        let split = stratified_split(&labels, 0.2, 0.2, 7).unwrap();
        let cfg = TrainConfig {
            max_epochs: 40,
            layers: 2,
            seed: 7,
            ..TrainConfig::default()
        };
        let model = Model::init(x.cols(), cfg.filters, 3, cfg.layers, &[1], 8).unwrap();
        let data = TrainData {
            features: &x,
            tensors: &tensors,
            labels: &labels,
            split: &split,
        };
        train(model, &data, &cfg).unwrap()
    };
    let (model_a, report_a) = run();
    let (model_b, report_b) = run();

    assert_eq!(report_a.epochs.len(), report_b.epochs.len());
    assert_eq!(report_a.chosen_epoch, report_b.chosen_epoch);
    for (ra, rb) in report_a.epochs.iter().zip(&report_b.epochs) {
        assert_eq!(ra.epoch, rb.epoch);
        assert_eq!(ra.train_loss.to_bits(), rb.train_loss.to_bits(), "train loss drifts");
        assert_eq!(ra.val_loss.to_bits(), rb.val_loss.to_bits(), "val loss drifts");
    }
    let (ma, mb) = (
        report_a.test_metrics.expect("test metrics"),
        report_b.test_metrics.expect("test metrics"),
    );
    assert_eq!(ma.accuracy.to_bits(), mb.accuracy.to_bits());
    assert_eq!(ma.micro_f1.to_bits(), mb.micro_f1.to_bits());
    assert_eq!(ma.macro_f1.to_bits(), mb.macro_f1.to_bits());

    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    motifconv::nn::checkpoint::save_checkpoint(&pa, &model_a, "same").unwrap();
    motifconv::nn::checkpoint::save_checkpoint(&pb, &model_b, "same").unwrap();
    let (bytes_a, bytes_b) = (std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    assert_eq!(bytes_a, bytes_b, "checkpoint bytes differ between identical runs");
    println!(
        "criterion 10 determinism: PASS \
         ({} epochs bit-identical, checkpoints {} bytes equal)",
        report_a.epochs.len(),
        bytes_a.len()
    );
}
