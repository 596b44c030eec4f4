//! Seeded synthetic datasets.
//!
//! `planted_hetero` builds a bibliographic-shaped graph (authors, papers,
//! venues) where the class signal lives exclusively on venue features and an
//! author's label is the majority class over the venues of her papers. An
//! author-paper-venue wedge reads that signal in one layer; plain edges need
//! two hops through feature-free papers, and the citation links give papers
//! wildly varying degrees, so untyped mean aggregation both dilutes the
//! venue signal and weights each paper's vote by an arbitrary factor.
//!
//! `sbm_homo` is a two-block stochastic block model with block-indicative
//! noisy features on every node.

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::graph::{Edge, HeteroGraph, TypeSet};
use crate::io::Dataset;
use crate::labels::{LabelSet, TaskKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

#[derive(Debug, Clone)]
pub struct PlantedConfig {
    pub authors: usize,
    pub papers_per_author: usize,
    pub venues: usize,
    pub classes: usize,
    /// Directed paper-to-paper links; pure clutter for the label signal.
    pub citations_per_paper: usize,
    /// Probability that a paper lands in a venue of a random class instead
    /// of its author's home class.
    pub venue_noise: f64,
    /// Half-width of the uniform noise added to every feature column.
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            authors: 350,
            papers_per_author: 3,
            venues: 100,
            classes: 3,
            citations_per_paper: 10,
            venue_noise: 0.15,
            feature_noise: 0.5,
            seed: 0,
        }
    }
}

fn noise(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    if half_width > 0.0 {
        rng.gen_range(-half_width..half_width)
    } else {
        0.0
    }
}

pub fn planted_hetero(cfg: &PlantedConfig) -> Result<Dataset> {
    let (a_count, v_count, k) = (cfg.authors, cfg.venues, cfg.classes);
    let p_count = a_count * cfg.papers_per_author;
    if a_count == 0 || cfg.papers_per_author == 0 || k < 2 {
        return Err(Error::Config(
            "planted graph needs authors, papers per author, and >= 2 classes".into(),
        ));
    }
    if v_count < k {
        return Err(Error::Config(format!(
            "{v_count} venues cannot cover {k} classes"
        )));
    }
    if cfg.citations_per_paper >= p_count {
        return Err(Error::Config(format!(
            "cannot cite {} distinct papers out of {p_count}",
            cfg.citations_per_paper
        )));
    }
    if !(0.0..=1.0).contains(&cfg.venue_noise) || cfg.feature_noise < 0.0 {
        return Err(Error::Config("noise settings out of range".into()));
    }

    let mut types = TypeSet::new();
    let a_t = types.intern("A");
    let p_t = types.intern("P");
    let v_t = types.intern("V");
    let mut node_types = vec![a_t; a_count];
    node_types.extend(std::iter::repeat(p_t).take(p_count));
    node_types.extend(std::iter::repeat(v_t).take(v_count));
    let paper_id = |j: usize| (a_count + j) as u32;
    let venue_id = |v: usize| (a_count + p_count + v) as u32;

    // Venue v carries class v % k, so every class owns >= 1 venue.
    let mut venues_of_class = vec![Vec::new(); k];
    for v in 0..v_count {
        venues_of_class[v % k].push(v);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut edges = Vec::new();
    let mut paper_venue_class = vec![0usize; p_count];
    for j in 0..p_count {
        let author = j / cfg.papers_per_author;
        edges.push(Edge {
            src: author as u32,
            dst: paper_id(j),
            directed: false,
        });
        let home = author % k;
        let class = if cfg.venue_noise > 0.0 && rng.gen::<f64>() < cfg.venue_noise {
            rng.gen_range(0..k)
        } else {
            home
        };
        let pool = &venues_of_class[class];
        let v = pool[rng.gen_range(0..pool.len())];
        paper_venue_class[j] = v % k;
        edges.push(Edge {
            src: paper_id(j),
            dst: venue_id(v),
            directed: false,
        });
    }
    for j in 0..p_count {
        let mut cited = BTreeSet::new();
        while cited.len() < cfg.citations_per_paper {
            let t = rng.gen_range(0..p_count);
            if t != j {
                cited.insert(t);
            }
        }
        for &t in &cited {
            edges.push(Edge {
                src: paper_id(j),
                dst: paper_id(t),
                directed: true,
            });
        }
    }

    // The label is the majority venue class actually realized, noise
    // included; ties go to the smallest class.
    let entries: Vec<(u32, Vec<u32>)> = (0..a_count)
        .map(|a| {
            let mut votes = vec![0usize; k];
            for j in a * cfg.papers_per_author..(a + 1) * cfg.papers_per_author {
                votes[paper_venue_class[j]] += 1;
            }
            let majority = (0..k).max_by_key(|&c| (votes[c], k - c)).unwrap();
            (a as u32, vec![majority as u32])
        })
        .collect();

    let mut features = FeatureTable::new();
    let mut author_rows = Vec::with_capacity(a_count * 2);
    for _ in 0..a_count {
        author_rows.push(1.0);
        author_rows.push(noise(&mut rng, cfg.feature_noise));
    }
    features.insert(a_t, 2, author_rows)?;
    let mut paper_rows = Vec::with_capacity(p_count * 2);
    for _ in 0..p_count {
        paper_rows.push(1.0);
        paper_rows.push(noise(&mut rng, cfg.feature_noise));
    }
    features.insert(p_t, 2, paper_rows)?;
    let mut venue_rows = Vec::with_capacity(v_count * k);
    for v in 0..v_count {
        for c in 0..k {
            let hot = if c == v % k { 1.0 } else { 0.0 };
            venue_rows.push(hot + noise(&mut rng, cfg.feature_noise));
        }
    }
    features.insert(v_t, k, venue_rows)?;

    Ok(Dataset {
        graph: HeteroGraph::new(types, node_types, edges)?,
        features,
        labels: Some(LabelSet::new(TaskKind::MultiClass { classes: k }, entries)?),
    })
}

#[derive(Debug, Clone)]
pub struct SbmConfig {
    pub nodes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        SbmConfig {
            nodes: 200,
            p_in: 0.2,
            p_out: 0.02,
            feature_noise: 0.3,
            seed: 0,
        }
    }
}

/// Two equal blocks (node i is in block i >= n/2); every node carries its
/// block one-hot plus uniform noise and its block as the label.
pub fn sbm_homo(cfg: &SbmConfig) -> Result<Dataset> {
    let n = cfg.nodes;
    if n < 4 {
        return Err(Error::Config("block model needs at least 4 nodes".into()));
    }
    for p in [cfg.p_in, cfg.p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config("edge probabilities must lie in [0, 1]".into()));
        }
    }
    if cfg.feature_noise < 0.0 {
        return Err(Error::Config("feature noise must be >= 0".into()));
    }
    let block = |i: usize| usize::from(i >= n / 2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if block(i) == block(j) { cfg.p_in } else { cfg.p_out };
            if rng.gen::<f64>() < p {
                edges.push(Edge {
                    src: i as u32,
                    dst: j as u32,
                    directed: false,
                });
            }
        }
    }
    let mut rows = Vec::with_capacity(n * 2);
    for i in 0..n {
        let b = block(i);
        rows.push(if b == 0 { 1.0 } else { 0.0 } + noise(&mut rng, cfg.feature_noise));
        rows.push(if b == 1 { 1.0 } else { 0.0 } + noise(&mut rng, cfg.feature_noise));
    }
    let graph = HeteroGraph::homogeneous(n, edges)?;
    let mut features = FeatureTable::new();
    features.insert(0, 2, rows)?;
    let entries = (0..n).map(|i| (i as u32, vec![block(i) as u32])).collect();
    Ok(Dataset {
        graph,
        features,
        labels: Some(LabelSet::new(TaskKind::MultiClass { classes: 2 }, entries)?),
    })
}
