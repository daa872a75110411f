//! Minimal library usage: exact free-induction-decay trace of the defect
//! coupled to its three nearest nitrogen nuclei, and the resulting T2*.

use vbsim::exact::{self, Method};
use vbsim::lattice::{standard_bath, BathPreset};
use vbsim::{analysis, ExactConfigF64, FieldParams, Protocol, TimeGrid};

fn main() -> vbsim::Result<()> {
    let trace = exact::coherence_trace(&ExactConfigF64 {
        sites: standard_bath(BathPreset::Fig1NRing1)?,
        field: FieldParams::new(1.0),
        temperature: 0.1,
        grid: TimeGrid::new(1.5e-6, 151)?,
        protocol: Protocol::Fid,
        method: Method::Block,
    })?;
    for (t, sx) in trace.times.iter().zip(&trace.sx).step_by(25) {
        println!("{t:.3e} s: sx = {sx:+.4}");
    }
    if let Some(t2) = analysis::coherence_time(&trace) {
        println!("T2* = {t2:.3e} s");
    }
    Ok(())
}
