//! Static semantics: turns a parsed AST into a [`Circuit`] with names
//! resolved, Kraus payloads loaded, signatures checked at every apply site,
//! and the linear wire lifecycle enforced (a wire is live from the node
//! that produces it to the node that consumes it; consuming a wire nothing
//! has produced makes it a circuit input).

use std::collections::HashMap;
use std::path::Path;

use super::{CircuitAst, RouteSpec, Statement};
use crate::channel::KrausChannel;
use crate::error::{Error, Result};
use crate::sectors::{PartitionedSpace, Route, SectorIndexing};

/// What an applied node does when the circuit is evaluated.
#[derive(Clone, Debug)]
pub enum NodeKind {
    /// Fixed channel loaded from the gate's payload file.
    Gate(KrausChannel),
    /// Placeholder for an externally bound channel.
    Slot,
}

/// One applied node of the resolved circuit.
#[derive(Clone, Debug)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    pub route: Route,
    /// Wire ids consumed, in signature order.
    pub in_wires: Vec<usize>,
    /// Wire ids produced, in signature order.
    pub out_wires: Vec<usize>,
    /// Sector indexing of the consumed wires' tensor product. Product
    /// sectors are not contiguous index blocks, so this carries explicit
    /// index sets rather than a flat partitioned space.
    pub in_sectors: SectorIndexing,
    pub out_sectors: SectorIndexing,
}

/// Resolved circuit: declarations bound, payloads loaded, lifecycle checked.
#[derive(Clone, Debug)]
pub struct Circuit {
    wire_names: Vec<String>,
    wire_spaces: Vec<PartitionedSpace>,
    nodes: Vec<Node>,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
}

impl Circuit {
    pub fn wire_name(&self, id: usize) -> &str {
        &self.wire_names[id]
    }

    pub fn wire_space(&self, id: usize) -> &PartitionedSpace {
        &self.wire_spaces[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Circuit input wires in discovery order (the order evaluation tensors
    /// them into the input space).
    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    /// Output wires in declaration order.
    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.iter().map(|&w| self.wire_spaces[w].dim()).product()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.iter().map(|&w| self.wire_spaces[w].dim()).product()
    }
}

/// Sector indexing of a tensor product of wires, left factor most
/// significant. Signatures are non-empty, so the fold has a seed.
fn product_indexing(factors: &[&PartitionedSpace]) -> SectorIndexing {
    factors[1..]
        .iter()
        .fold(factors[0].indexing(), |acc, s| acc.product(&s.indexing()))
}

struct Declaration {
    sig_in: Vec<usize>,
    sig_out: Vec<usize>,
    route: Route,
    kind: NodeKind,
}

fn bad(message: impl Into<String>) -> Error {
    Error::InvalidCircuit(message.into())
}

/// Resolves an AST against `base_dir` (the directory Kraus payload paths
/// are relative to, normally the circuit file's directory).
pub fn resolve(ast: &CircuitAst, base_dir: &Path) -> Result<Circuit> {
    let mut wire_names: Vec<String> = Vec::new();
    let mut wire_spaces: Vec<PartitionedSpace> = Vec::new();
    let mut wire_ids: HashMap<String, usize> = HashMap::new();
    let mut decls: HashMap<String, Declaration> = HashMap::new();
    let mut slot_uses: HashMap<String, usize> = HashMap::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut inputs: Vec<usize> = Vec::new();
    let mut outputs: Option<Vec<usize>> = None;

    let mut live: Vec<usize> = Vec::new();
    let mut touched = vec![];

    let lookup_wire = |ids: &HashMap<String, usize>, name: &str| -> Result<usize> {
        ids.get(name).copied().ok_or_else(|| bad(format!("unknown wire `{name}`")))
    };

    for stmt in &ast.statements {
        match stmt {
            Statement::Wire { name, sectors } => {
                if wire_ids.contains_key(name) || decls.contains_key(name) {
                    return Err(bad(format!("name `{name}` is declared twice")));
                }
                let id = wire_names.len();
                wire_ids.insert(name.clone(), id);
                wire_names.push(name.clone());
                wire_spaces.push(PartitionedSpace::new(sectors.clone())?);
                touched.push(false);
            }
            Statement::Gate { .. } | Statement::Slot { .. } => {
                let (name, sig_in, sig_out, route_spec, payload) = match stmt {
                    Statement::Gate { name, sig_in, sig_out, route, payload } => {
                        (name, sig_in, sig_out, route, Some(payload))
                    }
                    Statement::Slot { name, sig_in, sig_out, route } => {
                        (name, sig_in, sig_out, route, None)
                    }
                    _ => unreachable!(),
                };
                if wire_ids.contains_key(name) || decls.contains_key(name) {
                    return Err(bad(format!("name `{name}` is declared twice")));
                }
                let sig_in: Vec<usize> =
                    sig_in.iter().map(|w| lookup_wire(&wire_ids, w)).collect::<Result<_>>()?;
                let sig_out: Vec<usize> =
                    sig_out.iter().map(|w| lookup_wire(&wire_ids, w)).collect::<Result<_>>()?;
                let in_sectors =
                    product_indexing(&sig_in.iter().map(|&w| &wire_spaces[w]).collect::<Vec<_>>());
                let out_sectors =
                    product_indexing(&sig_out.iter().map(|&w| &wire_spaces[w]).collect::<Vec<_>>());
                let (n_in, n_out) = (in_sectors.sector_count(), out_sectors.sector_count());
                let route = match route_spec {
                    RouteSpec::Id => {
                        if n_in != n_out {
                            return Err(bad(format!(
                                "`{name}`: identity route needs equal sector counts, got {n_in} and {n_out}"
                            )));
                        }
                        Route::identity(n_in)
                    }
                    RouteSpec::Matrix(rows) => {
                        let r = Route::new(rows.clone())?;
                        if r.out_count() != n_out || r.in_count() != n_in {
                            return Err(bad(format!(
                                "`{name}`: route is {}x{} but the signature has {n_out} output and {n_in} input sectors",
                                r.out_count(),
                                r.in_count()
                            )));
                        }
                        r
                    }
                };
                let kind = match payload {
                    None => {
                        slot_uses.insert(name.clone(), 0);
                        NodeKind::Slot
                    }
                    Some(path) => {
                        let full = base_dir.join(path);
                        let text = std::fs::read_to_string(&full).map_err(|e| {
                            bad(format!("`{name}`: cannot read payload {}: {e}", full.display()))
                        })?;
                        let ch: KrausChannel = serde_json::from_str(&text).map_err(|e| {
                            bad(format!("`{name}`: bad payload {}: {e}", full.display()))
                        })?;
                        if ch.dim_in() != in_sectors.dim() || ch.dim_out() != out_sectors.dim() {
                            return Err(bad(format!(
                                "`{name}`: payload is {}→{} but the signature has dims {}→{}",
                                ch.dim_in(),
                                ch.dim_out(),
                                in_sectors.dim(),
                                out_sectors.dim()
                            )));
                        }
                        NodeKind::Gate(ch)
                    }
                };
                decls.insert(name.clone(), Declaration { sig_in, sig_out, route, kind });
            }
            Statement::Apply { node, in_wires, out_wires } => {
                let decl =
                    decls.get(node).ok_or_else(|| bad(format!("unknown gate or slot `{node}`")))?;
                if let Some(count) = slot_uses.get_mut(node) {
                    *count += 1;
                }
                let ins: Vec<usize> =
                    in_wires.iter().map(|w| lookup_wire(&wire_ids, w)).collect::<Result<_>>()?;
                let outs: Vec<usize> = match out_wires {
                    Some(ws) => ws.iter().map(|w| lookup_wire(&wire_ids, w)).collect::<Result<_>>()?,
                    None => ins.clone(),
                };
                for (label, wires, sig) in
                    [("input", &ins, &decl.sig_in), ("output", &outs, &decl.sig_out)]
                {
                    if wires.len() != sig.len() {
                        return Err(bad(format!(
                            "`{node}` applied to {} {label} wires but its signature has {}",
                            wires.len(),
                            sig.len()
                        )));
                    }
                    for (&w, &s) in wires.iter().zip(sig.iter()) {
                        if wire_spaces[w].sector_dims() != wire_spaces[s].sector_dims() {
                            return Err(bad(format!(
                                "`{node}`: {label} wire `{}` has sectors {:?} but the signature expects the type of `{}` ({:?})",
                                wire_names[w],
                                wire_spaces[w].sector_dims(),
                                wire_names[s],
                                wire_spaces[s].sector_dims()
                            )));
                        }
                    }
                }
                for &w in &ins {
                    if let Some(pos) = live.iter().position(|&l| l == w) {
                        live.remove(pos);
                    } else if !touched[w] {
                        inputs.push(w);
                    } else {
                        return Err(bad(format!(
                            "wire `{}` is not live at `{node}`",
                            wire_names[w]
                        )));
                    }
                    touched[w] = true;
                }
                for &w in &outs {
                    if live.contains(&w) {
                        return Err(bad(format!(
                            "`{node}` produces wire `{}` while it is still live",
                            wire_names[w]
                        )));
                    }
                    live.push(w);
                    touched[w] = true;
                }
                let in_sectors =
                    product_indexing(&ins.iter().map(|&w| &wire_spaces[w]).collect::<Vec<_>>());
                let out_sectors =
                    product_indexing(&outs.iter().map(|&w| &wire_spaces[w]).collect::<Vec<_>>());
                nodes.push(Node {
                    name: node.clone(),
                    kind: decl.kind.clone(),
                    route: decl.route.clone(),
                    in_wires: ins,
                    out_wires: outs,
                    in_sectors,
                    out_sectors,
                });
            }
            Statement::Output { wires } => {
                if outputs.is_some() {
                    return Err(bad("more than one output statement"));
                }
                outputs = Some(
                    wires.iter().map(|w| lookup_wire(&wire_ids, w)).collect::<Result<_>>()?,
                );
            }
        }
    }

    let outputs = outputs.ok_or_else(|| bad("missing output statement"))?;
    let mut remaining = live;
    for &w in &outputs {
        match remaining.iter().position(|&l| l == w) {
            Some(pos) => {
                remaining.remove(pos);
            }
            None => {
                return Err(bad(format!("output wire `{}` is not live at the end", wire_names[w])))
            }
        }
    }
    if let Some(&w) = remaining.first() {
        return Err(bad(format!("wire `{}` is left dangling", wire_names[w])));
    }
    for (name, count) in &slot_uses {
        if *count != 1 {
            return Err(bad(format!("slot `{name}` must be applied exactly once, found {count}")));
        }
    }

    Ok(Circuit { wire_names, wire_spaces, nodes, inputs, outputs })
}
