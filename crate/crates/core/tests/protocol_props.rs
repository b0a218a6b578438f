use hinf_core::convex::ConvexSetSpec;
use hinf_core::graph::Graph;
use hinf_core::protocol::{integrate, AgentConfig, DisturbanceSpec, Scenario, Trace};
use hinf_core::OutputWeights;
use proptest::prelude::*;

const DT: f64 = 0.01;
const HORIZON: f64 = 2.0;

#[derive(Debug, Clone)]
struct Setup {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    gains: Vec<f64>,
    boxes: Vec<(Vec<f64>, Vec<f64>)>,
    x0: Vec<Vec<f64>>,
    amplitudes: Vec<Vec<f64>>,
}

impl Setup {
    fn scenario(&self) -> Scenario {
        let graph = Graph::new(self.n, self.edges.clone()).unwrap();
        let agents = (0..self.n)
            .map(|i| {
                let (lo, hi) = self.boxes[i].clone();
                AgentConfig::new(self.gains[i], ConvexSetSpec::new_box(lo, hi).unwrap(), self.x0[i].clone()).unwrap()
            })
            .collect();
        let disturbances = self
            .amplitudes
            .iter()
            .map(|a| DisturbanceSpec::DecayingExp { amplitude: a.clone(), rate: 1.0 })
            .collect();
        Scenario::new(graph, agents, disturbances, OutputWeights::new(0.1, 0.1, 1.0).unwrap(), DT, HORIZON).unwrap()
    }

    fn translated(&self, v: &[f64]) -> Self {
        let add = |p: &Vec<f64>| p.iter().zip(v).map(|(a, b)| a + b).collect::<Vec<f64>>();
        Self {
            boxes: self.boxes.iter().map(|(lo, hi)| (add(lo), add(hi))).collect(),
            x0: self.x0.iter().map(add).collect(),
            ..self.clone()
        }
    }

    /// Agent `i` becomes agent `perm[i]`; the edge list keeps its order.
    fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        out.edges = self.edges.iter().map(|&(i, j, w)| (perm[i], perm[j], w)).collect();
        for i in 0..self.n {
            out.gains[perm[i]] = self.gains[i];
            out.boxes[perm[i]] = self.boxes[i].clone();
            out.x0[perm[i]] = self.x0[i].clone();
            out.amplitudes[perm[i]] = self.amplitudes[i].clone();
        }
        out
    }
}

fn setup() -> impl Strategy<Value = Setup> {
    (2usize..=5).prop_flat_map(|n| {
        let pt = || prop::collection::vec(-3.0..3.0f64, 2);
        (
            prop::collection::vec(0.2..3.0f64, n - 1),
            prop::collection::vec(0.2..3.0f64, n),
            prop::collection::vec((pt(), prop::collection::vec(0.1..2.0f64, 2), prop::collection::vec(0.1..2.0f64, 2)), n),
            prop::collection::vec(prop::collection::vec(-6.0..6.0f64, 2), n),
            prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 2), n),
        )
            .prop_map(move |(weights, gains, boxes, x0, amplitudes)| {
                // path plus a chord back to the start when n > 2
                let mut edges: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, weights[i])).collect();
                if n > 2 {
                    edges.push((n - 1, 0, 0.7));
                }
                let boxes = boxes
                    .into_iter()
                    .map(|(c, below, above)| {
                        let lo = c.iter().zip(&below).map(|(a, b)| a - b).collect();
                        let hi = c.iter().zip(&above).map(|(a, b)| a + b).collect();
                        (lo, hi)
                    })
                    .collect();
                Setup { n, edges, gains, boxes, x0, amplitudes }
            })
    })
}

fn max_gap(a: &Trace, b: &Trace, offset: &[f64]) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .flat_map(|(x, y)| {
            x.rows()
                .zip(y.rows())
                .flat_map(|(r, s)| r.iter().zip(s).zip(offset).map(|((p, q), o)| (p + o - q).abs()).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn common_feasible_point_is_an_equilibrium(mut s in setup(), p in prop::collection::vec(-3.0..3.0f64, 2)) {
        for (lo, hi) in s.boxes.iter_mut() {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        s.x0 = vec![p.clone(); s.n];
        s.amplitudes = vec![vec![0.0, 0.0]; s.n];
        let trace = integrate(&s.scenario()).unwrap();
        for x in &trace.states {
            for row in x.rows() {
                prop_assert_eq!(row, &p[..]);
            }
        }
    }

    #[test]
    fn translation_equivariant(s in setup(), v in prop::collection::vec(-5.0..5.0f64, 2)) {
        let base = integrate(&s.scenario()).unwrap();
        let moved = integrate(&s.translated(&v).scenario()).unwrap();
        prop_assert!(max_gap(&base, &moved, &v) <= 1e-9);
    }

    #[test]
    fn permutation_equivariant(s in setup(), shuffle in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle()) {
        let perm: Vec<usize> = shuffle.into_iter().filter(|&i| i < s.n).collect();
        let base = integrate(&s.scenario()).unwrap();
        let relabeled = integrate(&s.permuted(&perm).scenario()).unwrap();
        for (x, y) in base.states.iter().zip(&relabeled.states) {
            for i in 0..s.n {
                prop_assert_eq!(x.row(i), y.row(perm[i]));
            }
        }
    }
}
