use super::ExperimentError;
use crate::simulator::SimTrace;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub agent: usize,
    pub delta: bool,
    pub s: bool,
    pub sigma: f64,
    pub stage_cost: f64,
    pub tr_gamma_e: f64,
    pub tr_p_x: f64,
    pub x: Vec<f64>,
    pub xhat: Vec<f64>,
}

const FIXED_COLUMNS: [&str; 8] = ["step", "agent", "delta", "s", "sigma", "stage_cost", "tr_gamma_E", "tr_P_X"];

/// The rows a trace file holds, sorted by step then agent.
pub fn trace_records(trace: &SimTrace) -> Vec<TraceRecord> {
    let mut out = Vec::with_capacity(trace.num_steps() * trace.num_agents());
    for (step, row) in trace.steps.iter().enumerate() {
        for (agent, a) in row.iter().enumerate() {
            out.push(TraceRecord {
                step,
                agent,
                delta: a.delta,
                s: a.s,
                sigma: a.sigma,
                stage_cost: a.stage_cost,
                tr_gamma_e: a.tr_gamma_e,
                tr_p_x: a.tr_p_x,
                x: a.x.iter().copied().collect(),
                xhat: a.xhat.iter().copied().collect(),
            });
        }
    }
    out
}

fn header(states: usize) -> Vec<String> {
    let mut h: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    h.extend((0..states).map(|j| format!("x{j}")));
    h.extend((0..states).map(|j| format!("xhat{j}")));
    h
}

fn padded(values: &[f64], width: usize) -> impl Iterator<Item = String> + '_ {
    (0..width).map(move |j| values.get(j).map_or_else(String::new, f64::to_string))
}

/// Writes the trace as CSV. Floats use the shortest representation that
/// parses back to the same value; agents with fewer states than the widest
/// one leave their extra columns empty.
pub fn emit_trace(trace: &SimTrace, path: &Path) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io { path: path.to_path_buf(), source };
    let records = trace_records(trace);
    let states = records.iter().map(|r| r.x.len()).max().unwrap_or(0);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(File::create(path).map_err(io)?));
    let csv_err = |e: csv::Error| ExperimentError::Io { path: path.to_path_buf(), source: e.into() };
    w.write_record(header(states)).map_err(csv_err)?;
    for r in &records {
        let mut fields = vec![
            r.step.to_string(),
            r.agent.to_string(),
            u8::from(r.delta).to_string(),
            u8::from(r.s).to_string(),
            r.sigma.to_string(),
            r.stage_cost.to_string(),
            r.tr_gamma_e.to_string(),
            r.tr_p_x.to_string(),
        ];
        fields.extend(padded(&r.x, states));
        fields.extend(padded(&r.xhat, states));
        w.write_record(&fields).map_err(csv_err)?;
    }
    let mut inner = w.into_inner().map_err(|e| io(e.into_error()))?;
    inner.flush().map_err(io)
}

/// Reads a file written by [`emit_trace`].
pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, ExperimentError> {
    let bad = |msg: String| ExperimentError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, msg),
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let columns = reader.headers().map_err(|e| bad(e.to_string()))?.len();
    if columns < FIXED_COLUMNS.len() || (columns - FIXED_COLUMNS.len()) % 2 != 0 {
        return Err(bad(format!("unexpected column count {columns}")));
    }
    let states = (columns - FIXED_COLUMNS.len()) / 2;

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |j: usize| record.get(j).unwrap_or("");
        let int = |j: usize| field(j).parse::<usize>().map_err(|e| bad(format!("column {j}: {e}")));
        let float = |j: usize| field(j).parse::<f64>().map_err(|e| bad(format!("column {j}: {e}")));
        let flag = |j: usize| match field(j) {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(bad(format!("column {j}: expected 0 or 1, got {other:?}"))),
        };
        let vector = |start: usize| -> Result<Vec<f64>, ExperimentError> {
            (start..start + states).take_while(|&j| !field(j).is_empty()).map(float).collect()
        };
        out.push(TraceRecord {
            step: int(0)?,
            agent: int(1)?,
            delta: flag(2)?,
            s: flag(3)?,
            sigma: float(4)?,
            stage_cost: float(5)?,
            tr_gamma_e: float(6)?,
            tr_p_x: float(7)?,
            x: vector(8)?,
            xhat: vector(8 + states)?,
        });
    }
    Ok(out)
}
