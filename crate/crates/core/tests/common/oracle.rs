//! Brute-force cycle enumeration over every entity tuple.

use std::collections::BTreeSet;

use kg2corpus::cycles::{Cycle, CycleConfig, CycleKey, EdgeRelations};
use kg2corpus::store::TripleIdx;
use kg2corpus::{EntityIdx, KnowledgeGraph};

/// Plain adjacency matrix built straight from the triple list.
struct Matrix {
    n: usize,
    edges: Vec<Vec<Vec<TripleIdx>>>,
    hub: Vec<bool>,
}

impl Matrix {
    fn new(g: &KnowledgeGraph, cfg: &CycleConfig) -> Self {
        let n = g.entity_count();
        let mut edges = vec![vec![Vec::new(); n]; n];
        for (i, t) in g.triples().iter().enumerate() {
            let (h, tl) = (t.head.index(), t.tail.index());
            edges[h][tl].push(TripleIdx(i as u32));
            edges[tl][h].push(TripleIdx(i as u32));
        }
        if cfg.edge_relations == EdgeRelations::First {
            for row in edges.iter_mut() {
                for cell in row.iter_mut() {
                    cell.truncate(1);
                }
            }
        }
        let hub = (0..n)
            .map(|a| (0..n).filter(|&b| !edges[a][b].is_empty()).count() > cfg.degree_cap)
            .collect();
        Matrix { n, edges, hub }
    }

    fn e(&self, a: usize, b: usize) -> &[TripleIdx] {
        &self.edges[a][b]
    }

    fn live(&self, ids: &[usize]) -> bool {
        ids.iter().all(|&i| !self.hub[i])
    }
}

fn product(lists: &[&[TripleIdx]]) -> Vec<Vec<TripleIdx>> {
    if lists.iter().any(|l| l.is_empty()) {
        return Vec::new();
    }
    let mut out = vec![Vec::new()];
    for l in lists {
        out = out
            .into_iter()
            .flat_map(|p| {
                l.iter().map(move |&t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    out
}

pub type Shape = (Vec<TripleIdx>, Option<TripleIdx>);

pub type Found = (BTreeSet<Shape>, BTreeSet<CycleKey>);

pub fn oracle(g: &KnowledgeGraph, cfg: &CycleConfig) -> (Found, Found) {
    let m = Matrix::new(g, cfg);
    let ent = |i: usize| EntityIdx(i as u32);
    let (mut s3, mut k3) = (BTreeSet::new(), BTreeSet::new());
    let (mut s4, mut k4) = (BTreeSet::new(), BTreeSet::new());
    for a in 0..m.n {
        for b in a + 1..m.n {
            for c in b + 1..m.n {
                if !m.live(&[a, b, c]) {
                    continue;
                }
                let tri = [m.e(a, b), m.e(b, c), m.e(c, a)];
                for p in product(&tri) {
                    let cy = Cycle::triangle(g, [ent(a), ent(b), ent(c)], [p[0], p[1], p[2]]);
                    let mut sorted = p.clone();
                    sorted.sort();
                    s3.insert((sorted, None));
                    k3.insert(cy.key);
                }
                for d in c + 1..m.n {
                    if !m.live(&[a, b, c, d]) {
                        continue;
                    }
                    for ring in [[a, b, c, d], [a, b, d, c], [a, c, b, d]] {
                        for (x, y) in [(ring[0], ring[2]), (ring[1], ring[3])] {
                            let lists = [
                                m.e(ring[0], ring[1]),
                                m.e(ring[1], ring[2]),
                                m.e(ring[2], ring[3]),
                                m.e(ring[3], ring[0]),
                                m.e(x, y),
                            ];
                            if lists.iter().any(|l| l.is_empty()) {
                                continue;
                            }
                            for p in product(&lists) {
                                let r = ring.map(ent);
                                let cy = Cycle::diamond(g, r, [p[0], p[1], p[2], p[3]], p[4]);
                                let mut perim = p[..4].to_vec();
                                perim.sort();
                                s4.insert((perim, Some(p[4])));
                                k4.insert(cy.key);
                            }
                        }
                    }
                }
            }
        }
    }
    ((s3, k3), (s4, k4))
}

pub fn shapes(cycles: &[Cycle]) -> BTreeSet<Shape> {
    cycles
        .iter()
        .map(|c| {
            let mut p = c.perimeter().to_vec();
            p.sort();
            (p, c.diagonal())
        })
        .collect()
}

