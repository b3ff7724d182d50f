//! Temporal edge streams: loading, chronological splits, inductive masking,
//! negative sampling, and a brute-force k-hop neighborhood used as a test
//! oracle.
//!
//! Node ids are remapped to `1..=num_nodes` at load time. Id `0` is the
//! [`EMPTY`] sentinel used by the neighborhood caches.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::mix;

pub type NodeId = u32;

/// Reserved id marking an unoccupied cache slot.
pub const EMPTY: NodeId = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub t: f64,
    pub feat: Vec<f64>,
}

impl TemporalEdge {
    pub fn new(src: NodeId, dst: NodeId, t: f64) -> Self {
        Self {
            src,
            dst,
            t,
            feat: Vec::new(),
        }
    }

    pub fn touches(&self, n: NodeId) -> bool {
        self.src == n || self.dst == n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Sorted by `t`, file order preserved on ties.
    pub edges: Vec<TemporalEdge>,
    pub num_nodes: usize,
    pub d_e: usize,
    pub d_n: usize,
    pub node_feats: Option<Vec<f64>>,
    pub bipartite: bool,
    /// `original_ids[id]` is the id the node carried in the source file.
    /// Index 0 is unused.
    pub original_ids: Vec<u64>,
}

impl Dataset {
    /// Builds a dataset from edges whose ids already lie in `1..=num_nodes`.
    pub fn from_edges(mut edges: Vec<TemporalEdge>, num_nodes: usize) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::NoEdges);
        }
        let d_e = edges[0].feat.len();
        edges.sort_by(|a, b| a.t.total_cmp(&b.t));
        let ds = Self {
            edges,
            num_nodes,
            d_e,
            d_n: 0,
            node_feats: None,
            bipartite: false,
            original_ids: (0..=num_nodes as u64).collect(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.is_empty() {
            return Err(Error::NoEdges);
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, e) in self.edges.iter().enumerate() {
            for n in [e.src, e.dst] {
                if n == EMPTY || n as usize > self.num_nodes {
                    return Err(Error::NodeOutOfRange {
                        node: n,
                        num_nodes: self.num_nodes,
                    });
                }
            }
            if e.feat.len() != self.d_e {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("feature width {} != {}", e.feat.len(), self.d_e),
                });
            }
            if !(e.t >= 0.0) || e.t < prev {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("timestamp {} out of order or negative", e.t),
                });
            }
            prev = e.t;
        }
        Ok(())
    }

    /// All distinct destination ids, ascending. For bipartite data this is
    /// the item side.
    pub fn destination_universe(&self) -> Vec<NodeId> {
        let set: BTreeSet<NodeId> = self.edges.iter().map(|e| e.dst).collect();
        set.into_iter().collect()
    }

    /// Writes `src dst t` lines using the ids of the source file.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.edges {
            writeln!(
                w,
                "{} {} {}",
                self.original_ids[e.src as usize], self.original_ids[e.dst as usize], e.t
            )?;
        }
        Ok(())
    }

    pub fn edge_list_string(&self) -> String {
        let mut s = String::new();
        for e in &self.edges {
            let _ = writeln!(
                s,
                "{} {} {}",
                self.original_ids[e.src as usize], self.original_ids[e.dst as usize], e.t
            );
        }
        s
    }
}

/// Assigns contiguous ids in order of first appearance.
#[derive(Default)]
struct IdRemap {
    map: HashMap<u64, NodeId>,
    originals: Vec<u64>,
}

impl IdRemap {
    fn get(&mut self, raw: u64) -> usize {
        if let Some(&id) = self.map.get(&raw) {
            return id as usize;
        }
        self.originals.push(raw);
        let id = self.originals.len();
        self.map.insert(raw, id as NodeId);
        id
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {what} from {tok:?}"),
    })
}

fn parse_time(tok: &str, line: usize) -> Result<f64> {
    let t: f64 = parse_num(tok, line, "timestamp")?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Parse {
            line,
            msg: format!("timestamp must be finite and non-negative, got {t}"),
        });
    }
    Ok(t)
}

/// Loads the JODIE CSV layout `user,item,timestamp,state_label,f1,...,fD`.
///
/// Users get ids `1..=U` and items `U+1..=U+I`, each by first appearance.
/// The state label is parsed and discarded.
pub fn load_jodie_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_jodie_csv(&read(path.as_ref())?)
}

pub fn parse_jodie_csv(text: &str) -> Result<Dataset> {
    struct Row {
        user: u64,
        item: u64,
        t: f64,
        feat: Vec<f64>,
    }
    let mut rows = Vec::new();
    let mut d_e: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        let fields: Vec<&str> = s.split(',').collect();
        if rows.is_empty() && d_e.is_none() && fields[0].trim().parse::<u64>().is_err() {
            // header
            continue;
        }
        if fields.len() < 4 {
            return Err(Error::Parse {
                line,
                msg: format!("expected at least 4 fields, got {}", fields.len()),
            });
        }
        let user: u64 = parse_num(fields[0], line, "user id")?;
        let item: u64 = parse_num(fields[1], line, "item id")?;
        let t = parse_time(fields[2], line)?;
        let _label: f64 = parse_num(fields[3], line, "state label")?;
        let feat = fields[4..]
            .iter()
            .map(|f| parse_num::<f64>(f, line, "feature"))
            .collect::<Result<Vec<_>>>()?;
        match d_e {
            None => d_e = Some(feat.len()),
            Some(w) if w != feat.len() => {
                return Err(Error::Parse {
                    line,
                    msg: format!("feature width {} differs from first row ({w})", feat.len()),
                })
            }
            _ => {}
        }
        rows.push(Row { user, item, t, feat });
    }
    if rows.is_empty() {
        return Err(Error::NoEdges);
    }
    let mut users = IdRemap::default();
    for r in &rows {
        users.get(r.user);
    }
    let n_users = users.originals.len();
    let mut items = IdRemap::default();
    let mut edges: Vec<TemporalEdge> = rows
        .into_iter()
        .map(|r| TemporalEdge {
            src: users.get(r.user) as NodeId,
            dst: (n_users + items.get(r.item)) as NodeId,
            t: r.t,
            feat: r.feat,
        })
        .collect();
    edges.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut original_ids = vec![0];
    original_ids.extend(users.originals.iter().copied());
    original_ids.extend(items.originals.iter().copied());
    let ds = Dataset {
        num_nodes: n_users + items.originals.len(),
        d_e: d_e.unwrap_or(0),
        d_n: 0,
        node_feats: None,
        bipartite: true,
        original_ids,
        edges,
    };
    ds.validate()?;
    Ok(ds)
}

/// Loads a plain `src dst t` edge list, whitespace or comma separated, with
/// `#` comments.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_edge_list(&read(path.as_ref())?)
}

pub fn parse_edge_list(text: &str) -> Result<Dataset> {
    let mut remap = IdRemap::default();
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        let toks: Vec<&str> = s
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if toks.len() < 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected `src dst t`, got {} fields", toks.len()),
            });
        }
        let src: u64 = parse_num(toks[0], line, "source id")?;
        let dst: u64 = parse_num(toks[1], line, "destination id")?;
        let t = parse_time(toks[2], line)?;
        edges.push(TemporalEdge::new(
            remap.get(src) as NodeId,
            remap.get(dst) as NodeId,
            t,
        ));
    }
    if edges.is_empty() {
        return Err(Error::NoEdges);
    }
    edges.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut original_ids = vec![0];
    original_ids.extend(remap.originals.iter().copied());
    let ds = Dataset {
        num_nodes: remap.originals.len(),
        d_e: 0,
        d_n: 0,
        node_feats: None,
        bipartite: false,
        original_ids,
        edges,
    };
    ds.validate()?;
    Ok(ds)
}

/// Chronological train/val/test boundaries plus the inductive mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub train_end: usize,
    pub val_end: usize,
    pub masked_nodes: BTreeSet<NodeId>,
    pub mask_prob: f64,
    pub seed: u64,
}

fn floor_frac(frac: f64, n: usize) -> usize {
    // guards against 0.29*100 == 28.999999999999996
    ((frac * n as f64) * (1.0 + 1e-12)).floor() as usize
}

pub fn chronological_split(ds: &Dataset, train_frac: f64, val_frac: f64) -> Result<SplitPlan> {
    if !(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0) {
        return Err(Error::Config(format!(
            "split fractions must be positive and sum below 1 (got {train_frac}, {val_frac})"
        )));
    }
    let n = ds.edges.len();
    let train_end = floor_frac(train_frac, n).min(n);
    let val_end = (train_end + floor_frac(val_frac, n)).min(n);
    Ok(SplitPlan {
        train_end,
        val_end,
        masked_nodes: BTreeSet::new(),
        mask_prob: 0.0,
        seed: 0,
    })
}

/// Masks each node that appears in validation or test edges independently
/// with probability `p`.
pub fn inductive_mask(ds: &Dataset, plan: &SplitPlan, p: f64, seed: u64) -> SplitPlan {
    let candidates: BTreeSet<NodeId> = ds.edges[plan.train_end..]
        .iter()
        .flat_map(|e| [e.src, e.dst])
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masked_nodes = candidates
        .into_iter()
        .filter(|_| rng.gen::<f64>() < p)
        .collect();
    SplitPlan {
        masked_nodes,
        mask_prob: p,
        seed,
        ..plan.clone()
    }
}

impl SplitPlan {
    pub fn train<'a>(&self, ds: &'a Dataset) -> &'a [TemporalEdge] {
        &ds.edges[..self.train_end]
    }

    pub fn val<'a>(&self, ds: &'a Dataset) -> &'a [TemporalEdge] {
        &ds.edges[self.train_end..self.val_end]
    }

    pub fn test<'a>(&self, ds: &'a Dataset) -> &'a [TemporalEdge] {
        &ds.edges[self.val_end..]
    }

    pub fn is_masked_edge(&self, e: &TemporalEdge) -> bool {
        self.masked_nodes.contains(&e.src) || self.masked_nodes.contains(&e.dst)
    }

    /// Training edges with every edge incident to a masked node removed.
    pub fn training_stream(&self, ds: &Dataset) -> Vec<TemporalEdge> {
        self.train(ds)
            .iter()
            .filter(|e| !self.is_masked_edge(e))
            .cloned()
            .collect()
    }

    /// Test edges with at least one masked endpoint.
    pub fn inductive_test_edges(&self, ds: &Dataset) -> Vec<TemporalEdge> {
        self.test(ds)
            .iter()
            .filter(|e| self.is_masked_edge(e))
            .cloned()
            .collect()
    }

    pub fn to_record(&self) -> String {
        let masked: Vec<String> = self.masked_nodes.iter().map(|n| n.to_string()).collect();
        format!(
            "train_end={}\nval_end={}\nmask_prob={}\nseed={}\nmasked={}\n",
            self.train_end,
            self.val_end,
            self.mask_prob,
            self.seed,
            masked.join(",")
        )
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut plan = SplitPlan {
            train_end: 0,
            val_end: 0,
            masked_nodes: BTreeSet::new(),
            mask_prob: 0.0,
            seed: 0,
        };
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: "expected key=value".into(),
            })?;
            let v = v.trim();
            match k.trim() {
                "train_end" => plan.train_end = parse_num(v, line, "train_end")?,
                "val_end" => plan.val_end = parse_num(v, line, "val_end")?,
                "mask_prob" => plan.mask_prob = parse_num(v, line, "mask_prob")?,
                "seed" => plan.seed = parse_num(v, line, "seed")?,
                "masked" => {
                    for tok in v.split(',').filter(|t| !t.trim().is_empty()) {
                        plan.masked_nodes.insert(parse_num(tok, line, "node id")?);
                    }
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown key {other:?}"),
                    })
                }
            }
            seen.insert(k.trim().to_string());
        }
        for key in ["train_end", "val_end"] {
            if !seen.contains(key) {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("missing {key}"),
                });
            }
        }
        if plan.train_end > plan.val_end {
            return Err(Error::Parse {
                line: 0,
                msg: "train_end > val_end".into(),
            });
        }
        Ok(plan)
    }
}

/// One uniformly drawn negative destination per positive edge.
pub fn sample_negatives(batch: &[TemporalEdge], universe: &[NodeId], seed: u64) -> Vec<NodeId> {
    assert!(!universe.is_empty(), "negative sampling universe is empty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    batch
        .iter()
        .map(|_| universe[rng.gen_range(0..universe.len())])
        .collect()
}

/// Seeded negative sampler whose draws depend only on the absolute stream
/// position of a batch, so batches sample the same negatives no matter how
/// a stream is sliced.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    pub universe: Vec<NodeId>,
    pub seed: u64,
}

impl NegativeSampler {
    pub fn new(universe: Vec<NodeId>, seed: u64) -> Self {
        assert!(!universe.is_empty(), "negative sampling universe is empty");
        Self { universe, seed }
    }

    pub fn for_batch(&self, start: usize, batch: &[TemporalEdge]) -> Vec<NodeId> {
        sample_negatives(batch, &self.universe, mix(&[self.seed, start as u64]))
    }
}

/// Exact `N_v^{t,k}`: nodes with a walk of length exactly `k` to `v` in the
/// static graph of all edges strictly before `t`. Brute force; tests only.
pub fn khop_neighborhood(ds: &Dataset, v: NodeId, t: f64, k: usize) -> BTreeSet<NodeId> {
    assert!(k >= 1, "k must be at least 1");
    let mut adj: HashMap<NodeId, BTreeSet<NodeId>> = HashMap::new();
    for e in ds.edges.iter().take_while(|e| e.t < t) {
        adj.entry(e.src).or_default().insert(e.dst);
        adj.entry(e.dst).or_default().insert(e.src);
    }
    let mut frontier: BTreeSet<NodeId> = BTreeSet::from([v]);
    for _ in 0..k {
        frontier = frontier
            .iter()
            .filter_map(|n| adj.get(n))
            .flatten()
            .copied()
            .collect();
    }
    frontier
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(edges: &[(NodeId, NodeId, f64)]) -> Dataset {
        let n = edges.iter().map(|&(a, b, _)| a.max(b)).max().unwrap() as usize;
        Dataset::from_edges(
            edges.iter().map(|&(a, b, t)| TemporalEdge::new(a, b, t)).collect(),
            n,
        )
        .unwrap()
    }

    #[test]
    fn jodie_three_rows() {
        let text = "user_id,item_id,timestamp,state_label,f1,f2\n\
                    0,0,0.0,0,0.1,0.2\n\
                    1,0,5.0,0,0.3,0.4\n\
                    0,1,2.0,1,0.5,0.6\n";
        let ds = parse_jodie_csv(text).unwrap();
        assert_eq!(ds.edges.len(), 3);
        assert_eq!(ds.d_e, 2);
        assert_eq!(ds.num_nodes, 4);
        assert!(ds.bipartite);
        // sorted by time, users 1..=2, items 3..=4
        let ts: Vec<f64> = ds.edges.iter().map(|e| e.t).collect();
        assert_eq!(ts, vec![0.0, 2.0, 5.0]);
        assert!(ds.edges.iter().all(|e| e.src <= 2 && e.dst >= 3));
    }

    #[test]
    fn jodie_errors() {
        assert!(matches!(parse_jodie_csv(""), Err(Error::NoEdges)));
        let bad = "0,0,1.0,0,0.1\n0,1,2.0,0,0.1,0.2\n";
        assert!(matches!(parse_jodie_csv(bad), Err(Error::Parse { line: 2, .. })));
        let junk = "0,0,1.0,0\n0,x,2.0,0\n";
        assert!(matches!(parse_jodie_csv(junk), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn edge_list_basics() {
        let ds = parse_edge_list("1 2 0.0\n2 3 1.0").unwrap();
        assert_eq!(ds.edges.len(), 2);
        assert_eq!(ds.num_nodes, 3);
        assert_eq!(ds.d_e, 0);

        let dup = parse_edge_list("# comment\n1,2,0\n1 2 0\n").unwrap();
        assert_eq!(dup.edges.len(), 2);

        assert!(matches!(parse_edge_list("1 2 -1.0"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_edge_list("# nothing\n"), Err(Error::NoEdges)));
    }

    #[test]
    fn unsorted_input_is_sorted_stably() {
        let ds = parse_edge_list("1 2 5\n3 4 1\n5 6 1\n").unwrap();
        let pairs: Vec<(u64, u64)> = ds
            .edges
            .iter()
            .map(|e| (ds.original_ids[e.src as usize], ds.original_ids[e.dst as usize]))
            .collect();
        assert_eq!(pairs, vec![(3, 4), (5, 6), (1, 2)]);
    }

    #[test]
    fn split_boundaries() {
        let ds = toy(&(0..100).map(|i| (1, 2, i as f64)).collect::<Vec<_>>());
        let p = chronological_split(&ds, 0.70, 0.15).unwrap();
        assert_eq!((p.train_end, p.val_end), (70, 85));

        let ds = toy(&(0..10).map(|i| (1, 2, i as f64)).collect::<Vec<_>>());
        let p = chronological_split(&ds, 0.70, 0.15).unwrap();
        assert_eq!((p.train_end, p.val_end), (7, 8));

        assert!(chronological_split(&ds, 0.9, 0.1).is_err());
        assert!(chronological_split(&ds, 0.0, 0.1).is_err());
    }

    #[test]
    fn split_at_wikipedia_scale() {
        // floor(0.70 * 157474) = floor(110231.8)
        assert_eq!(floor_frac(0.70, 157_474), 110_231);
        assert_eq!(floor_frac(0.15, 157_474), 23_621);
    }

    #[test]
    fn mask_extremes() {
        let ds = toy(&[(1, 2, 0.0), (3, 4, 1.0), (1, 3, 2.0), (5, 6, 3.0), (2, 5, 4.0)]);
        let plan = chronological_split(&ds, 0.4, 0.2).unwrap();
        let none = inductive_mask(&ds, &plan, 0.0, 7);
        assert!(none.masked_nodes.is_empty());
        assert_eq!(none.training_stream(&ds), plan.train(&ds).to_vec());

        let all = inductive_mask(&ds, &plan, 1.0, 7);
        let later: BTreeSet<NodeId> = ds.edges[plan.train_end..]
            .iter()
            .flat_map(|e| [e.src, e.dst])
            .collect();
        assert_eq!(all.masked_nodes, later);
        for e in all.training_stream(&ds) {
            assert!(!later.contains(&e.src) && !later.contains(&e.dst));
        }
    }

    #[test]
    fn mask_is_reproducible() {
        let ds = toy(&[
            (1, 2, 0.0),
            (2, 3, 1.0),
            (3, 4, 2.0),
            (4, 5, 3.0),
            (5, 6, 4.0),
            (6, 1, 5.0),
        ]);
        let plan = chronological_split(&ds, 0.3, 0.3).unwrap();
        let a = inductive_mask(&ds, &plan, 0.5, 42);
        let b = inductive_mask(&ds, &plan, 0.5, 42);
        assert_eq!(a.masked_nodes, b.masked_nodes);
    }

    #[test]
    fn plan_record_round_trip() {
        let ds = toy(&[(1, 2, 0.0), (3, 4, 1.0), (1, 3, 2.0), (5, 6, 3.0), (2, 5, 4.0)]);
        let plan = inductive_mask(&ds, &chronological_split(&ds, 0.4, 0.2).unwrap(), 0.5, 3);
        let back = SplitPlan::from_record(&plan.to_record()).unwrap();
        assert_eq!(plan, back);
        assert!(SplitPlan::from_record("val_end=3\n").is_err());
    }

    #[test]
    fn negatives() {
        let batch = vec![TemporalEdge::new(1, 2, 0.0); 3];
        assert_eq!(sample_negatives(&batch, &[5], 1), vec![5, 5, 5]);
        let u: Vec<NodeId> = (1..=50).collect();
        assert_eq!(sample_negatives(&batch, &u, 9), sample_negatives(&batch, &u, 9));
    }

    #[test]
    fn khop_basics() {
        let a = 1;
        let v = 2;
        let b = 3;
        let ds = toy(&[(a, v, 1.0), (a, b, 2.0)]);
        assert!(khop_neighborhood(&ds, v, 0.5, 1).is_empty());
        let two = khop_neighborhood(&ds, v, 3.0, 2);
        assert!(two.contains(&b) && two.contains(&v));
        // edges at exactly t are excluded
        assert!(!khop_neighborhood(&ds, v, 2.0, 2).contains(&b));
    }

    #[test]
    fn fig1_common_neighbor() {
        // u=1, a=2, v=3, w=4, c=5: u-a, a-v, w-c before t3
        let ds = toy(&[(1, 2, 1.0), (2, 3, 2.0), (4, 5, 2.0)]);
        let t3 = 3.0;
        assert!(khop_neighborhood(&ds, 1, t3, 1).contains(&2));
        assert!(khop_neighborhood(&ds, 3, t3, 1).contains(&2));
        assert!(!khop_neighborhood(&ds, 4, t3, 1).contains(&2));
    }
}
