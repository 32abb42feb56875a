//! Shipped circuit fixtures: a two-slot routed interferometer, its Kraus
//! payloads, and a pair of sample slot bindings, plus the writer that
//! regenerates the files under `fixtures/`.
//!
//! The circuit routes a data qubit through one of two channel slots
//! selected by a one-bit control. Each slot sees a vacuum-plus-data
//! carrier of sector shape `[1, 2]` and must preserve that split, which
//! is exactly the interface [`crate::supermaps::two_ctrl_apply`] expects,
//! so evaluating the circuit on a pair of bindings must reproduce that
//! construction.

use std::path::{Path, PathBuf};

use crate::channel::KrausChannel;
use crate::sectors::{build_isometric_sp, RoutedKrausChannel};
use crate::tensor::{c64, ComplexMatrix};

/// Directory the shipped fixture files live in.
pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Isometry loading control ⊗ data into the carrier pair X ⊗ Y: control 0
/// puts the data in Y's data sector with X in vacuum, control 1 puts it
/// in X with Y in vacuum. Carriers have sector shape `[1, 2]`, so the
/// carrier-pair flat index is `x * 3 + y`.
pub fn two_ctrl_expand() -> KrausChannel {
    let mut m = ComplexMatrix::zeros(9, 4);
    for t in 0..2 {
        m.set(1 + t, t, c64(1.0, 0.0));
        m.set(3 * (1 + t), 2 + t, c64(1.0, 0.0));
    }
    KrausChannel::new(vec![m]).expect("the expand isometry is trace preserving")
}

/// Left inverse of [`two_ctrl_expand`] completed to a trace-preserving
/// channel: carrier-pair states outside the isometry's range are
/// discarded into the maximally mixed control ⊗ data state.
pub fn two_ctrl_contract() -> KrausChannel {
    let mut ops = vec![two_ctrl_expand().kraus()[0].adjoint()];
    for p in [0usize, 4, 5, 7, 8] {
        for c in 0..4 {
            let op = ComplexMatrix::basis_column(4, c)
                .mul(&ComplexMatrix::basis_column(9, p).adjoint())
                .expect("outer product of basis vectors");
            ops.push(op.scale(c64(0.5, 0.0)));
        }
    }
    KrausChannel::new(ops).expect("the completion restores trace preservation")
}

/// Source text of the shipped circuit.
pub fn two_ctrl_circuit_text() -> String {
    "\
# A one-bit control routes a data qubit through one of two channel slots.
#
# expand loads the data into carrier Y when the control is 0 and into
# carrier X when it is 1, leaving the other carrier in its vacuum sector.
# Each slot acts on one carrier without mixing vacuum and data, and
# contract reads the carrier pair back into control and data. The whole
# circuit therefore applies the slot on Y for control 0 and the slot on
# X for control 1, coherently.

wire C : [1, 1];
wire T : [2];
wire X : [1, 2];
wire Y : [1, 2];

gate expand : C * T -> X * Y route [[0, 0], [1, 0], [0, 1], [0, 0]] kraus @fig6_expand.json;
slot B : X -> X route id;
slot A : Y -> Y route id;
gate contract : X * Y -> C * T route [[1, 1, 0, 1], [1, 0, 1, 1]] kraus @fig6_contract.json;

apply expand (C, T) -> (X, Y);
apply B (X);
apply A (Y);
apply contract (X, Y) -> (C, T);

output C, T;
"
    .to_string()
}

/// Sample binding for slot A: the bit-flip unitary on the data sector,
/// vacuum untouched.
pub fn flip_slot_binding() -> RoutedKrausChannel {
    let x = ComplexMatrix::from_real_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    build_isometric_sp(&x).expect("a unitary embeds as a sector-preserving isometry")
}

/// Sample binding for slot B: the quarter-phase unitary on the data
/// sector, vacuum untouched.
pub fn phase_slot_binding() -> RoutedKrausChannel {
    let s = ComplexMatrix::from_row_slice(
        2,
        2,
        &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 1.0)],
    );
    build_isometric_sp(&s).expect("a unitary embeds as a sector-preserving isometry")
}

/// File names and contents of every shipped fixture.
pub fn fixture_files() -> Vec<(&'static str, String)> {
    vec![
        ("fig6_two_ctrl.rqc", two_ctrl_circuit_text()),
        ("fig6_expand.json", pretty(&two_ctrl_expand())),
        ("fig6_contract.json", pretty(&two_ctrl_contract())),
        ("fig6_slot_a.json", pretty(&flip_slot_binding())),
        ("fig6_slot_b.json", pretty(&phase_slot_binding())),
    ]
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("fixture values serialize");
    text.push('\n');
    text
}

/// Writes every shipped fixture into [`fixtures_dir`], creating it if
/// needed.
pub fn write_fixtures() -> std::io::Result<()> {
    let dir = fixtures_dir();
    std::fs::create_dir_all(&dir)?;
    for (name, text) in fixture_files() {
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}
