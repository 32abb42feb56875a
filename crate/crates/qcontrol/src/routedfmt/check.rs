//! Route type-checking: verifies every fixed gate follows its declared
//! route, records the obligations slots impose on their eval-time bindings,
//! and composes the per-node routes into the circuit's end-to-end route by
//! relation algebra.

use serde::Serialize;

use super::resolve::{Circuit, NodeKind};
use crate::error::Result;
use crate::sectors::{route_compose, route_tensor, route_violations, Route};
use crate::tensor::leg_permutation;
use crate::tensor::tol::EQ_TOL;

/// Check outcome for one applied node. Slots have nothing to verify
/// statically, so they are always `ok`; their routes appear as obligations.
#[derive(Clone, Debug, Serialize)]
pub struct NodeStatus {
    pub index: usize,
    pub name: String,
    pub kind: String,
    pub ok: bool,
}

/// A fixed gate placing amplitude on a sector pair its route forbids.
#[derive(Clone, Debug, Serialize)]
pub struct RouteCheckViolation {
    pub node: usize,
    pub name: String,
    pub in_wires: Vec<String>,
    pub out_wires: Vec<String>,
    pub in_sector: usize,
    pub out_sector: usize,
    pub leakage: f64,
}

/// Route a slot's binding must follow, enforced when the circuit is
/// evaluated.
#[derive(Clone, Debug, Serialize)]
pub struct SlotObligation {
    pub slot: String,
    pub route: Route,
}

/// Result of [`check`]: per-node statuses, the violations behind any
/// failures, the slots' obligations, and the composed end-to-end route from
/// the circuit's input sectors to its output sectors.
#[derive(Clone, Debug, Serialize)]
pub struct RouteCheckReport {
    pub nodes: Vec<NodeStatus>,
    pub violations: Vec<RouteCheckViolation>,
    pub slot_obligations: Vec<SlotObligation>,
    pub composed: Route,
}

impl RouteCheckReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relation realizing a basis permutation: allows s → p[s] only.
fn permutation_route(p: &[usize]) -> Route {
    let n = p.len();
    let mut allowed = vec![vec![false; n]; n];
    for (s, &t) in p.iter().enumerate() {
        allowed[t][s] = true;
    }
    Route::relation(allowed).expect("permutation relation is well formed")
}

/// Verifies the circuit's gates against their routes and composes the route
/// the whole circuit follows. The composition walks the nodes the same way
/// evaluation does, at the sector level: spectator wires contribute
/// identity factors, wire reorderings contribute permutation relations.
pub fn check(c: &Circuit) -> Result<RouteCheckReport> {
    let mut nodes = Vec::new();
    let mut violations = Vec::new();
    let mut slot_obligations = Vec::new();
    for (index, node) in c.nodes().iter().enumerate() {
        let mut ok = true;
        let kind = match &node.kind {
            NodeKind::Gate(ch) => {
                let found = route_violations(
                    ch.kraus(),
                    &node.in_sectors,
                    &node.out_sectors,
                    &node.route,
                    EQ_TOL,
                )?;
                for (l, k, leakage) in found {
                    ok = false;
                    violations.push(RouteCheckViolation {
                        node: index,
                        name: node.name.clone(),
                        in_wires: node.in_wires.iter().map(|&w| c.wire_name(w).into()).collect(),
                        out_wires: node.out_wires.iter().map(|&w| c.wire_name(w).into()).collect(),
                        in_sector: k,
                        out_sector: l,
                        leakage,
                    });
                }
                "gate"
            }
            NodeKind::Slot => {
                slot_obligations
                    .push(SlotObligation { slot: node.name.clone(), route: node.route.clone() });
                "slot"
            }
        };
        nodes.push(NodeStatus { index, name: node.name.clone(), kind: kind.into(), ok });
    }

    let sectors = |w: usize| c.wire_space(w).sector_dims().len();
    let mut live: Vec<usize> = Vec::new();
    let mut composed = Route::relation(vec![vec![true]])?;
    for node in c.nodes() {
        for &w in &node.in_wires {
            if !live.contains(&w) {
                composed = route_tensor(&composed, &Route::identity(sectors(w)));
                live.push(w);
            }
        }
        let counts: Vec<usize> = live.iter().map(|&w| sectors(w)).collect();
        let mut source: Vec<usize> =
            (0..live.len()).filter(|&i| !node.in_wires.contains(&live[i])).collect();
        source.extend(
            node.in_wires.iter().map(|&w| live.iter().position(|&l| l == w).unwrap()),
        );
        if source.iter().enumerate().any(|(j, &s)| j != s) {
            let p = leg_permutation(&counts, &source);
            composed = route_compose(&permutation_route(&p), &composed)?;
        }
        live = source.iter().map(|&s| live[s]).collect();
        let spectators: usize =
            live[..live.len() - node.in_wires.len()].iter().map(|&w| sectors(w)).product();
        let lifted = route_tensor(&Route::identity(spectators), &node.route);
        composed = route_compose(&lifted, &composed)?;
        live.truncate(live.len() - node.in_wires.len());
        live.extend(node.out_wires.iter().copied());
    }
    let counts: Vec<usize> = live.iter().map(|&w| sectors(w)).collect();
    let source: Vec<usize> = c
        .outputs()
        .iter()
        .map(|&w| live.iter().position(|&l| l == w).unwrap())
        .collect();
    if source.iter().enumerate().any(|(j, &s)| j != s) {
        let p = leg_permutation(&counts, &source);
        composed = route_compose(&permutation_route(&p), &composed)?;
    }

    Ok(RouteCheckReport { nodes, violations, slot_obligations, composed })
}

#[cfg(test)]
mod tests {
    use super::super::{fixtures, parse, resolve};
    use super::*;
    use crate::channel::KrausChannel;
    use crate::prng::Prng;
    use crate::sectors::{follows_route, random_routed_channel, PartitionedSpace};
    use crate::tensor::ComplexMatrix;
    use std::path::PathBuf;

    fn shipped_report() -> RouteCheckReport {
        let ast = parse(&fixtures::two_ctrl_circuit_text()).unwrap();
        check(&resolve(&ast, &fixtures::fixtures_dir()).unwrap()).unwrap()
    }

    #[test]
    fn shipped_circuit_checks_clean_with_identity_end_to_end_route() {
        let report = shipped_report();
        assert!(report.ok());
        assert!(report.nodes.iter().all(|n| n.ok));
        assert_eq!(report.slot_obligations.len(), 2);
        assert!(report.slot_obligations.iter().all(|o| o.route.is_identity()));
        assert_eq!(report.composed.in_count(), 2);
        assert!(report.composed.is_identity());
    }

    fn payload_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("rqc_check_{tag}"));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn a_leaking_gate_is_reported_with_its_sector_pair() {
        let dir = payload_dir("leak");
        let swap = ComplexMatrix::from_real_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let ch = KrausChannel::new(vec![swap]).unwrap();
        std::fs::write(dir.join("swap.json"), serde_json::to_string(&ch).unwrap()).unwrap();
        let text = "wire S : [1, 1];\n\
                    gate G : S -> S route [[1, 0], [0, 1]] kraus @swap.json;\n\
                    apply G (S);\noutput S;\n";
        let report = check(&resolve(&parse(text).unwrap(), &dir).unwrap()).unwrap();
        assert!(!report.ok());
        assert!(!report.nodes[0].ok);
        let coords: Vec<(usize, usize)> =
            report.violations.iter().map(|v| (v.out_sector, v.in_sector)).collect();
        assert!(coords.contains(&(1, 0)) && coords.contains(&(0, 1)), "{coords:?}");
        assert!(report.violations.iter().all(|v| v.name == "G" && (v.leakage - 1.0).abs() < 1e-12));
    }

    #[test]
    fn identity_route_chain_composes_to_the_identity() {
        let text = "wire S : [1, 2];\n\
                    slot A : S -> S route id;\nslot B : S -> S route id;\n\
                    apply A (S);\napply B (S);\noutput S;\n";
        let report = check(&resolve(&parse(text).unwrap(), &fixtures::fixtures_dir()).unwrap())
            .unwrap();
        assert!(report.ok());
        assert!(report.composed.is_identity());
        assert_eq!(report.composed.in_count(), 2);
    }

    #[test]
    fn check_agrees_with_the_direct_route_test() {
        let dir = payload_dir("differential");
        let space = PartitionedSpace::new(vec![1, 2]).unwrap();
        let route = crate::sectors::Route::identity(2);
        for seed in 0..6u64 {
            let mut rng = Prng::split(400 + seed, 0);
            let ch = if seed % 2 == 0 {
                random_routed_channel(&space, &space, &route, 2, &mut rng)
                    .unwrap()
                    .channel()
                    .clone()
            } else {
                KrausChannel::new(vec![crate::prng::haar_unitary(3, &mut rng)]).unwrap()
            };
            let name = format!("case_{seed}.json");
            std::fs::write(dir.join(&name), serde_json::to_string(&ch).unwrap()).unwrap();
            let text = format!(
                "wire S : [1, 2];\ngate G : S -> S route [[1, 0], [0, 1]] kraus @{name};\n\
                 apply G (S);\noutput S;\n"
            );
            let report =
                check(&resolve(&parse(&text).unwrap(), &dir).unwrap()).unwrap();
            let direct = follows_route(&ch, &space, &space, &route).unwrap();
            assert_eq!(report.ok(), direct, "seed {seed}");
        }
    }
}
