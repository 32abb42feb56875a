//! Evaluation: contracts a resolved circuit and its slot bindings into one
//! Kraus channel.
//!
//! The contraction walks the nodes in order while tracking the live wires
//! as an ordered tensor factorization. A wire consumed before anything
//! produced it is a circuit input and is tensored in on first use, so the
//! channel's input space is the product of [`Circuit::inputs`] in order;
//! the output space is the product of [`Circuit::outputs`]. Before a node
//! fires, its wires are moved to the least-significant positions by a
//! basis permutation; the node's Kraus family (gate payload or slot
//! binding) then acts there under an identity on the spectator wires.

use std::collections::{HashMap, HashSet};

use super::resolve::{Circuit, NodeKind};
use crate::channel::KrausChannel;
use crate::error::{Error, Result};
use crate::sectors::{route_violations, RoutedKrausChannel};
use crate::supermaps::product_layer;
use crate::tensor::tol::EQ_TOL;
use crate::tensor::{leg_permutation, ComplexMatrix};

fn permute_rows(op: &ComplexMatrix, p: &[usize]) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(op.rows(), op.cols());
    for (i, &t) in p.iter().enumerate() {
        for c in 0..op.cols() {
            out.set(t, c, op.get(i, c));
        }
    }
    out
}

/// Contracts the circuit with the given slot bindings. Every slot must be
/// bound by a channel whose partitioned spaces match the slot's signature
/// and whose Kraus family follows the slot's declared route.
pub fn eval(
    c: &Circuit,
    bindings: &HashMap<String, RoutedKrausChannel>,
) -> Result<KrausChannel> {
    let slot_names: HashSet<&str> = c
        .nodes()
        .iter()
        .filter(|n| matches!(n.kind, NodeKind::Slot))
        .map(|n| n.name.as_str())
        .collect();
    let mut extraneous: Vec<&String> =
        bindings.keys().filter(|k| !slot_names.contains(k.as_str())).collect();
    extraneous.sort();
    if let Some(name) = extraneous.first() {
        return Err(Error::InvalidCircuit(format!("binding `{name}` does not match any slot")));
    }
    for node in c.nodes() {
        if !matches!(node.kind, NodeKind::Slot) {
            continue;
        }
        let b = bindings
            .get(&node.name)
            .ok_or_else(|| Error::UnboundSlot(node.name.clone()))?;
        if b.space_in().sector_dims() != node.in_sectors.sector_dims()
            || b.space_out().sector_dims() != node.out_sectors.sector_dims()
        {
            return Err(Error::DimensionMismatch(format!(
                "binding for slot `{}` has sectors {:?}→{:?} but the slot expects {:?}→{:?}",
                node.name,
                b.space_in().sector_dims(),
                b.space_out().sector_dims(),
                node.in_sectors.sector_dims(),
                node.out_sectors.sector_dims()
            )));
        }
        let violations = route_violations(
            b.channel().kraus(),
            &node.in_sectors,
            &node.out_sectors,
            &node.route,
            EQ_TOL,
        )?;
        if let Some((l, k, leakage)) = violations.first() {
            return Err(Error::RouteViolation(format!(
                "binding for slot `{}` leaks {leakage:.3e} from input sector {k} into forbidden output sector {l}",
                node.name
            )));
        }
    }

    let mut acc = vec![ComplexMatrix::identity(1)];
    let mut live: Vec<usize> = Vec::new();
    for node in c.nodes() {
        for &w in &node.in_wires {
            if !live.contains(&w) {
                let eye = ComplexMatrix::identity(c.wire_space(w).dim());
                acc = acc.iter().map(|a| a.kron(&eye)).collect();
                live.push(w);
            }
        }
        let dims: Vec<usize> = live.iter().map(|&w| c.wire_space(w).dim()).collect();
        let mut source: Vec<usize> =
            (0..live.len()).filter(|&i| !node.in_wires.contains(&live[i])).collect();
        source.extend(
            node.in_wires.iter().map(|&w| live.iter().position(|&l| l == w).unwrap()),
        );
        if source.iter().enumerate().any(|(j, &s)| j != s) {
            let p = leg_permutation(&dims, &source);
            acc = acc.iter().map(|a| permute_rows(a, &p)).collect();
        }
        live = source.iter().map(|&s| live[s]).collect();
        let spectators: usize = live[..live.len() - node.in_wires.len()]
            .iter()
            .map(|&w| c.wire_space(w).dim())
            .product();
        let ops = match &node.kind {
            NodeKind::Gate(ch) => ch.kraus(),
            NodeKind::Slot => bindings[&node.name].channel().kraus(),
        };
        let eye = ComplexMatrix::identity(spectators);
        let layer: Vec<ComplexMatrix> = ops.iter().map(|k| eye.kron(k)).collect();
        acc = product_layer(&acc, &layer)?;
        live.truncate(live.len() - node.in_wires.len());
        live.extend(node.out_wires.iter().copied());
    }

    let dims: Vec<usize> = live.iter().map(|&w| c.wire_space(w).dim()).collect();
    let source: Vec<usize> = c
        .outputs()
        .iter()
        .map(|&w| live.iter().position(|&l| l == w).unwrap())
        .collect();
    if source.iter().enumerate().any(|(j, &s)| j != s) {
        let p = leg_permutation(&dims, &source);
        acc = acc.iter().map(|a| permute_rows(a, &p)).collect();
    }
    KrausChannel::new(acc)
}

#[cfg(test)]
mod tests {
    use super::super::{fixtures, parse, resolve};
    use super::*;
    use crate::channel::{channels_equal, random_cptp, PinnedChannel};
    use crate::control::build_ctrl_two_unitary;
    use crate::prng::{haar_isometry, haar_unitary, Prng};
    use crate::sectors::{
        build_isometric_sp, build_sector_preserving_1d, PartitionedSpace, Route,
    };
    use crate::supermaps::two_ctrl_apply;

    fn shipped() -> Circuit {
        let ast = parse(&fixtures::two_ctrl_circuit_text()).unwrap();
        resolve(&ast, &fixtures::fixtures_dir()).unwrap()
    }

    fn bind(a: RoutedKrausChannel, b: RoutedKrausChannel) -> HashMap<String, RoutedKrausChannel> {
        HashMap::from([("A".to_string(), a), ("B".to_string(), b)])
    }

    #[test]
    fn identity_bindings_evaluate_to_the_identity_channel() {
        let e = build_isometric_sp(&ComplexMatrix::identity(2)).unwrap();
        let got = eval(&shipped(), &bind(e.clone(), e)).unwrap();
        assert!(channels_equal(&got, &KrausChannel::identity(4), EQ_TOL).unwrap());
    }

    #[test]
    fn isometry_bindings_evaluate_to_the_controlled_pair() {
        let mut rng = Prng::split(71, 0);
        let u = haar_unitary(2, &mut rng);
        let v = haar_unitary(2, &mut rng);
        let got = eval(
            &shipped(),
            &bind(build_isometric_sp(&u).unwrap(), build_isometric_sp(&v).unwrap()),
        )
        .unwrap();
        let want = build_ctrl_two_unitary(&u, &v).unwrap();
        assert!(channels_equal(&got, want.channel(), EQ_TOL).unwrap());
    }

    #[test]
    fn random_bindings_match_the_direct_two_channel_construction() {
        for seed in [81u64, 82, 83] {
            let mk = |s: u64| {
                let c = random_cptp(2, 2, 2, s).unwrap();
                let p = PinnedChannel::from_pin(&c, &c.kraus()[0]).unwrap();
                build_sector_preserving_1d(&p).unwrap()
            };
            let (a, b) = (mk(seed), mk(seed + 100));
            let got = eval(&shipped(), &bind(a.routed().clone(), b.routed().clone())).unwrap();
            let want = two_ctrl_apply(a.routed(), b.routed()).unwrap();
            assert!(
                channels_equal(&got, want.channel(), EQ_TOL).unwrap(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn missing_and_extraneous_bindings_are_rejected() {
        let e = build_isometric_sp(&ComplexMatrix::identity(2)).unwrap();
        let mut only_a = HashMap::from([("A".to_string(), e.clone())]);
        match eval(&shipped(), &only_a) {
            Err(Error::UnboundSlot(name)) => assert_eq!(name, "B"),
            other => panic!("expected an unbound-slot error, got {other:?}"),
        }
        only_a.insert("B".to_string(), e.clone());
        only_a.insert("expand".to_string(), e);
        assert!(matches!(eval(&shipped(), &only_a), Err(Error::InvalidCircuit(_))));
    }

    #[test]
    fn bindings_with_wrong_shape_or_route_are_rejected() {
        let e3 = build_isometric_sp(&ComplexMatrix::identity(3)).unwrap();
        let good = build_isometric_sp(&ComplexMatrix::identity(2)).unwrap();
        match eval(&shipped(), &bind(e3, good.clone())) {
            Err(Error::DimensionMismatch(msg)) => assert!(msg.contains("slot `A`"), "{msg}"),
            other => panic!("expected a shape error, got {other:?}"),
        }

        let space = PartitionedSpace::new(vec![1, 2]).unwrap();
        let free = Route::new(vec![vec![true, true], vec![true, true]]).unwrap();
        let mixing = RoutedKrausChannel::new(
            KrausChannel::new(vec![haar_unitary(3, &mut Prng::split(72, 0))]).unwrap(),
            space.clone(),
            space,
            free,
        )
        .unwrap();
        match eval(&shipped(), &bind(mixing, good)) {
            Err(Error::RouteViolation(msg)) => assert!(msg.contains("slot `A`"), "{msg}"),
            other => panic!("expected a route violation, got {other:?}"),
        }
    }

    #[test]
    fn shape_mismatched_isometry_binding_is_rejected() {
        let tall = build_isometric_sp(&haar_isometry(3, 2, &mut Prng::split(73, 0))).unwrap();
        let good = build_isometric_sp(&ComplexMatrix::identity(2)).unwrap();
        assert!(matches!(
            eval(&shipped(), &bind(tall, good)),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
