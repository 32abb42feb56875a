//! A small text format for routed circuits: layered wire diagrams whose
//! nodes are Kraus-channel gates or named input slots, each annotated with
//! the route it must follow.
//!
//! A circuit file (`.rqc`) is a sequence of statements:
//!
//! ```text
//! # comment to end of line
//! wire C : [1, 1];                 # a wire and its sector dimensions
//! wire T : [2];
//! gate g : C * T -> C * T route [[1, 0], [0, 1]] kraus @g.json;
//! slot A : T -> T route id;        # externally bound channel
//! apply g (C, T);                  # outputs default to the input wires
//! apply A (T);
//! apply g (C, T) -> (C, T);        # explicit output wires
//! output C, T;
//! ```
//!
//! Gate signatures name declared wires as types (`C * T` is the tensor
//! product of those wires' partitioned spaces); `route id` is the identity
//! route, and a route matrix lists one row per output sector of Boolean
//! (0/1) entries indexed by input sector. Kraus payloads are JSON files in
//! the channel encoding, referenced with `@path` relative to the circuit
//! file.
//!
//! The pipeline is [`parse`] (text → AST), [`resolve`] (AST → a checked
//! [`Circuit`] with payloads loaded and the linear wire lifecycle
//! enforced), [`check`] (per-node route verification and the composed
//! end-to-end route), and [`eval`] (contraction to a
//! [`KrausChannel`](crate::channel::KrausChannel) given slot bindings).

use std::fmt;

mod check;
mod eval;
pub mod fixtures;
mod parser;
mod resolve;

pub use check::{check, NodeStatus, RouteCheckReport, RouteCheckViolation, SlotObligation};
pub use eval::eval;
pub use parser::parse;
pub use resolve::{resolve, Circuit, Node, NodeKind};

/// Parsed circuit text: the statements in file order, before any name
/// resolution or payload loading.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CircuitAst {
    pub statements: Vec<Statement>,
}

/// One statement of the circuit text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Statement {
    Wire { name: String, sectors: Vec<usize> },
    Gate { name: String, sig_in: Vec<String>, sig_out: Vec<String>, route: RouteSpec, payload: String },
    Slot { name: String, sig_in: Vec<String>, sig_out: Vec<String>, route: RouteSpec },
    Apply { node: String, in_wires: Vec<String>, out_wires: Option<Vec<String>> },
    Output { wires: Vec<String> },
}

/// Route annotation as written: the `id` keyword or an explicit Boolean
/// matrix (rows = output sectors, columns = input sectors).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RouteSpec {
    Id,
    Matrix(Vec<Vec<bool>>),
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[String], sep: &str) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        f.write_str(item)?;
    }
    Ok(())
}

impl fmt::Display for RouteSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RouteSpec::Id => f.write_str("id"),
            RouteSpec::Matrix(rows) => {
                f.write_str("[")?;
                for (i, row) in rows.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str("[")?;
                    for (j, &b) in row.iter().enumerate() {
                        if j > 0 {
                            f.write_str(", ")?;
                        }
                        f.write_str(if b { "1" } else { "0" })?;
                    }
                    f.write_str("]")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Wire { name, sectors } => {
                write!(f, "wire {name} : [")?;
                for (i, d) in sectors.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{d}")?;
                }
                f.write_str("];")
            }
            Statement::Gate { name, sig_in, sig_out, route, payload } => {
                write!(f, "gate {name} : ")?;
                write_list(f, sig_in, " * ")?;
                f.write_str(" -> ")?;
                write_list(f, sig_out, " * ")?;
                write!(f, " route {route} kraus @{payload};")
            }
            Statement::Slot { name, sig_in, sig_out, route } => {
                write!(f, "slot {name} : ")?;
                write_list(f, sig_in, " * ")?;
                f.write_str(" -> ")?;
                write_list(f, sig_out, " * ")?;
                write!(f, " route {route};")
            }
            Statement::Apply { node, in_wires, out_wires } => {
                write!(f, "apply {node} (")?;
                write_list(f, in_wires, ", ")?;
                f.write_str(")")?;
                if let Some(outs) = out_wires {
                    f.write_str(" -> (")?;
                    write_list(f, outs, ", ")?;
                    f.write_str(")")?;
                }
                f.write_str(";")
            }
            Statement::Output { wires } => {
                f.write_str("output ")?;
                write_list(f, wires, ", ")?;
                f.write_str(";")
            }
        }
    }
}

/// Canonical text form: one statement per line. Comments are not part of
/// the AST, so they do not survive printing; `parse` of the printed text
/// returns an equal AST.
impl fmt::Display for CircuitAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}
