mod common;

use std::collections::BTreeSet;

use common::oracle::{oracle, shapes};
use kg2corpus::cycles::{extract_len3, extract_len4, Cycle, CycleConfig, EdgeRelations};
use kg2corpus::store::{GraphBuilder, TripleIdx};
use kg2corpus::{EntityIdx, KnowledgeGraph};
use proptest::prelude::*;

fn random_graph(n: usize, edges: &[(usize, usize, usize)]) -> KnowledgeGraph {
    let mut b = GraphBuilder::unlabeled();
    for &(h, r, t) in edges {
        b.add(&format!("Q{}", h % n), &format!("P{r}"), &format!("Q{}", t % n));
    }
    b.build()
}

fn check(g: &KnowledgeGraph, cfg: &CycleConfig) {
    let ((s3, k3), (s4, k4)) = oracle(g, cfg);
    let (c3, _) = extract_len3(g, cfg);
    let (c4, _) = extract_len4(g, cfg);
    assert_eq!(shapes(&c3), s3);
    assert_eq!(shapes(&c4), s4);
    assert_eq!(c3.iter().map(|c| c.key).collect::<BTreeSet<_>>(), k3);
    assert_eq!(c4.iter().map(|c| c.key).collect::<BTreeSet<_>>(), k4);
    assert_eq!(c3.len(), k3.len());
    assert_eq!(c4.len(), k4.len());
    assert!(c3.windows(2).all(|w| w[0].key < w[1].key));
    assert!(c4.windows(2).all(|w| w[0].key < w[1].key));
}

#[test]
fn complete_graphs_match_closed_form() {
    for n in 3..=8usize {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, 0, j));
            }
        }
        let g = random_graph(n, &edges);
        let cfg = CycleConfig::default();
        let c3 = extract_len3(&g, &cfg).0.len();
        let c4 = extract_len4(&g, &cfg).0.len();
        // C(n,3) triangles; every 4-set has 3 perimeters x 2 diagonals
        let choose = |k: usize| (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
        assert_eq!(c3, choose(3));
        assert_eq!(c4, 6 * choose(4));
        check(&g, &cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn matches_brute_force(
        n in 3usize..12,
        edges in prop::collection::vec((0usize..12, 0usize..3, 0usize..12), 0..40),
        all in any::<bool>(),
        cap in 2usize..12,
    ) {
        let g = random_graph(n, &edges);
        let cfg = CycleConfig {
            degree_cap: cap,
            edge_relations: if all { EdgeRelations::All } else { EdgeRelations::First },
        };
        check(&g, &cfg);
    }

    #[test]
    fn key_is_independent_of_input_orientation(
        edges in prop::collection::vec((0usize..8, 0usize..2, 0usize..8), 5..30),
        shift in 0usize..4,
        flip in any::<bool>(),
    ) {
        let g = random_graph(8, &edges);
        let (c4, _) = extract_len4(&g, &CycleConfig::default());
        for c in &c4 {
            let mut ring: Vec<EntityIdx> = c.entities().to_vec();
            let mut perim: Vec<TripleIdx> = c.perimeter().to_vec();
            ring.rotate_left(shift);
            perim.rotate_left(shift);
            if flip {
                ring.reverse();
                perim.reverse();
                perim.rotate_left(1);
            }
            let again = Cycle::diamond(
                &g,
                [ring[0], ring[1], ring[2], ring[3]],
                [perim[0], perim[1], perim[2], perim[3]],
                c.diagonal().unwrap(),
            );
            prop_assert_eq!(again, *c);
        }
    }
}
