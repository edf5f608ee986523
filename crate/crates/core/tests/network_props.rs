mod common;

use common::rng;
use infoseek::network::{delay_for, fim_consensus_step, CommGraph, DelayChannel, DelayRole, FimConsensusState, Topology};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn spd(r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(2, 2, |_, _| r.random_range(-1.0..1.0));
    &b * b.transpose()
}

fn sum(ms: impl IntoIterator<Item = DMatrix<f64>>) -> DMatrix<f64> {
    ms.into_iter().fold(DMatrix::zeros(2, 2), |acc, m| acc + m)
}

#[test]
fn complete_graph_averages_in_one_step() {
    let mut r = rng(1);
    let n = 7;
    let graph = CommGraph::complete(n).unwrap();
    let agents: Vec<_> = (0..n)
        .map(|_| {
            let f = spd(&mut r);
            FimConsensusState { estimate: spd(&mut r), current: f.clone(), previous: f }
        })
        .collect();
    let mean = sum(agents.iter().map(|a| a.estimate.clone())) / n as f64;
    for next in fim_consensus_step(&agents, &graph).unwrap() {
        assert!((next - &mean).amax() <= 1e-15 * mean.amax().max(1.0) * n as f64);
    }
}

#[test]
fn fim_consensus_tracks_changing_sum() {
    // sum_j F_hat_j - sum_j F_j is invariant, so initializing F_hat = F keeps
    // the network average equal to the mean partial FIM at every round
    let mut r = rng(2);
    let n = 10;
    let graph = CommGraph::circulant(n, 2).unwrap();
    let mut current: Vec<_> = (0..n).map(|_| spd(&mut r)).collect();
    let mut agents: Vec<_> = current
        .iter()
        .map(|f| FimConsensusState { estimate: f.clone(), current: f.clone(), previous: f.clone() })
        .collect();
    for _ in 0..200 {
        let previous = std::mem::replace(&mut current, (0..n).map(|_| spd(&mut r)).collect());
        let staged: Vec<_> = agents
            .iter()
            .zip(current.iter().zip(&previous))
            .map(|(a, (c, p))| FimConsensusState { estimate: a.estimate.clone(), current: c.clone(), previous: p.clone() })
            .collect();
        let estimates = fim_consensus_step(&staged, &graph).unwrap();
        let lhs = sum(estimates.iter().cloned());
        let rhs = sum(current.iter().cloned());
        assert!((lhs - &rhs).amax() <= 1e-10 * rhs.amax().max(1.0));
        agents = estimates
            .into_iter()
            .zip(&current)
            .map(|(e, c)| FimConsensusState { estimate: e, current: c.clone(), previous: c.clone() })
            .collect();
    }
}

#[test]
fn static_partials_converge_to_mean() {
    let mut r = rng(3);
    let n = 12;
    let graph = CommGraph::circulant(n, 2).unwrap();
    let partials: Vec<_> = (0..n).map(|_| spd(&mut r)).collect();
    let mean = sum(partials.iter().cloned()) / n as f64;
    let mut agents: Vec<_> = partials
        .iter()
        .map(|f| FimConsensusState { estimate: f.clone(), current: f.clone(), previous: f.clone() })
        .collect();
    for _ in 0..500 {
        let next = fim_consensus_step(&agents, &graph).unwrap();
        for (a, e) in agents.iter_mut().zip(next) {
            a.estimate = e;
        }
    }
    for a in &agents {
        assert!((&a.estimate - &mean).amax() < 1e-9);
    }
}

#[test]
fn delay_channel_releases_on_schedule() {
    let mut ch = DelayChannel::new(2);
    ch.send(1, "a");
    assert_eq!(ch.latest(1), None);
    assert_eq!(ch.latest(2), None);
    ch.send(3, "b");
    assert_eq!(ch.latest(3), Some((1, &"a")));
    assert_eq!(ch.latest(4), Some((1, &"a")));
    assert_eq!(ch.latest(5), Some((3, &"b")));

    let mut now = DelayChannel::new(0);
    now.send(7, 1);
    assert_eq!(now.latest(7), Some((7, &1)));
}

#[test]
fn delays_grow_with_incoming_links() {
    assert_eq!(delay_for(DelayRole::Centralized(10)), 5);
    assert_eq!(delay_for(DelayRole::Centralized(40)), 20);
    assert_eq!(delay_for(DelayRole::Distributed(2)), 1);
    assert_eq!(delay_for(DelayRole::Distributed(1)), 0);
}

proptest! {
    #[test]
    fn metropolis_weights_are_doubly_stochastic(n in 3usize..60, half in 1usize..4) {
        let degree = 2 * half;
        prop_assume!(degree < n);
        let graph = CommGraph::build(n, &Topology::Circulant { degree }).unwrap();
        graph.check_doubly_stochastic().unwrap();
        for j in 0..n {
            prop_assert_eq!(graph.in_degree(j), degree);
            prop_assert!(graph.weight(j, j) > 0.0);
        }
    }

    #[test]
    fn custom_symmetric_graphs_are_doubly_stochastic(seed in 0u64..2_000, n in 2usize..15) {
        let mut r = rng(seed);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if r.random_bool(0.4) {
                    edges.push((a, b));
                    edges.push((b, a));
                }
            }
        }
        let graph = CommGraph::custom(n, &edges).unwrap();
        graph.check_row_stochastic().unwrap();
        graph.check_doubly_stochastic().unwrap();
    }
}
