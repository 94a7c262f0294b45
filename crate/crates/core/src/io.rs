//! File formats: kernel CSV (bit-exact round trip at 17 significant
//! digits), per-detector signal CSV, and the volume container (flat binary
//! with a small header plus per-slice CSV export).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::attenuation::AttenuationLaw;
use crate::error::{Error, Result};
use crate::forward::PressureSignal;
use crate::grid::TimeGrid;
use crate::inverse::ProjectionSignal;
use crate::kernels::{KernelDiagnostics, KernelKind, KernelMatrix};
use crate::pulse::Pulse;
use crate::recon::VolumeGrid;

/// 17 significant digits: round-trips every f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn law_str(law: &AttenuationLaw) -> String {
    match law {
        AttenuationLaw::None => "none".into(),
        AttenuationLaw::PowerLaw { gamma, alpha0 } => {
            format!("power gamma={} alpha0={}", fmt_f64(*gamma), fmt_f64(*alpha0))
        }
        AttenuationLaw::CausalLaw { gamma, alpha0, tau0 } => format!(
            "causal gamma={} alpha0={} tau0={}",
            fmt_f64(*gamma),
            fmt_f64(*alpha0),
            fmt_f64(*tau0)
        ),
    }
}

fn parse_law(s: &str) -> Result<AttenuationLaw> {
    let mut parts = s.split_whitespace();
    let kind = parts.next().ok_or_else(|| Error::Parse("empty law".into()))?;
    let mut kv = std::collections::HashMap::new();
    for p in parts {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad law field {p}")))?;
        kv.insert(k.to_string(), parse_f64(v)?);
    }
    match kind {
        "none" => Ok(AttenuationLaw::None),
        "power" => AttenuationLaw::power_law(kv["gamma"], kv["alpha0"]),
        "causal" => AttenuationLaw::causal_law(kv["gamma"], kv["alpha0"], kv["tau0"]),
        other => Err(Error::Parse(format!("unknown law kind {other}"))),
    }
}

fn pulse_str(p: &Pulse) -> String {
    match p {
        Pulse::Delta => "delta".into(),
        Pulse::RaisedCosine { t1 } => format!("raised-cosine t1={}", fmt_f64(*t1)),
    }
}

fn parse_pulse(s: &str) -> Result<Pulse> {
    let mut parts = s.split_whitespace();
    match parts.next() {
        Some("delta") => Ok(Pulse::Delta),
        Some("raised-cosine") => {
            let t1 = parts
                .next()
                .and_then(|p| p.strip_prefix("t1="))
                .ok_or_else(|| Error::Parse("raised-cosine needs t1".into()))?;
            Pulse::raised_cosine(parse_f64(t1)?)
        }
        other => Err(Error::Parse(format!("unknown pulse {other:?}"))),
    }
}

fn kind_str(k: &KernelKind) -> String {
    match k {
        KernelKind::Dissipation => "dissipation".into(),
        KernelKind::PulsedDissipation => "pulsed-dissipation".into(),
        KernelKind::PointDetector => "point".into(),
        KernelKind::PlanarDetector { r0 } => format!("planar r0={}", fmt_f64(*r0)),
        KernelKind::LineDetector => "line".into(),
    }
}

fn parse_kind(s: &str) -> Result<KernelKind> {
    let mut parts = s.split_whitespace();
    match parts.next() {
        Some("dissipation") => Ok(KernelKind::Dissipation),
        Some("pulsed-dissipation") => Ok(KernelKind::PulsedDissipation),
        Some("point") => Ok(KernelKind::PointDetector),
        Some("line") => Ok(KernelKind::LineDetector),
        Some("planar") => {
            let r0 = parts
                .next()
                .and_then(|p| p.strip_prefix("r0="))
                .ok_or_else(|| Error::Parse("planar kernel needs r0".into()))?;
            Ok(KernelKind::PlanarDetector { r0: parse_f64(r0)? })
        }
        other => Err(Error::Parse(format!("unknown kernel kind {other:?}"))),
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad float {s}: {e}")))
}

/// Kernel CSV: `# key: value` header lines then one comma-separated line
/// per matrix row (row-major).
pub fn write_kernel_csv(kernel: &KernelMatrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# kind: {}", kind_str(&kernel.kind))?;
    writeln!(w, "# law: {}", law_str(&kernel.law))?;
    writeln!(w, "# pulse: {}", pulse_str(&kernel.pulse))?;
    writeln!(w, "# n: {}", kernel.grid().n())?;
    writeln!(w, "# dt: {}", fmt_f64(kernel.grid().dt()))?;
    writeln!(w, "# cols: {}", kernel.ncols())?;
    writeln!(w, "# causal_mask: {}", kernel.causal_mask)?;
    let mut line = String::new();
    for i in 0..kernel.nrows() {
        line.clear();
        for j in 0..kernel.ncols() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&fmt_f64(kernel.get(i, j)));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_kernel_csv(path: &Path) -> Result<KernelMatrix> {
    let r = BufReader::new(File::open(path)?);
    let mut kind = None;
    let mut law = None;
    let mut pulse = None;
    let mut n = None;
    let mut dt = None;
    let mut ncols = None;
    let mut causal_mask = false;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in r.lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((k, v)) = rest.split_once(':') {
                let v = v.trim();
                match k.trim() {
                    "kind" => kind = Some(parse_kind(v)?),
                    "law" => law = Some(parse_law(v)?),
                    "pulse" => pulse = Some(parse_pulse(v)?),
                    "n" => n = Some(v.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?),
                    "dt" => dt = Some(parse_f64(v)?),
                    "cols" => {
                        ncols =
                            Some(v.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?)
                    }
                    "causal_mask" => {
                        causal_mask =
                            v.parse::<bool>().map_err(|e| Error::Parse(e.to_string()))?
                    }
                    _ => {}
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>> = line.split(',').map(parse_f64).collect();
        rows.push(row?);
    }
    let kind = kind.ok_or_else(|| Error::Parse("missing kind".into()))?;
    let law = law.ok_or_else(|| Error::Parse("missing law".into()))?;
    let pulse = pulse.ok_or_else(|| Error::Parse("missing pulse".into()))?;
    let n = n.ok_or_else(|| Error::Parse("missing n".into()))?;
    let dt = dt.ok_or_else(|| Error::Parse("missing dt".into()))?;
    let ncols = ncols.ok_or_else(|| Error::Parse("missing cols".into()))?;
    if rows.len() != n || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "expected {n} x {ncols} values, got {} rows",
            rows.len()
        )));
    }
    let grid = TimeGrid::new(n, dt)?;
    KernelMatrix::from_rows(kind, law, pulse, grid, rows, causal_mask, KernelDiagnostics::default())
}

/// Signal CSV: `t,value` per sample with a geometry comment header.
pub fn write_signal_csv(sig: &PressureSignal, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# detector: {}", sig.detector)?;
    writeln!(w, "# geometry: {:?}", sig.geometry)?;
    writeln!(w, "t,value")?;
    for (i, v) in sig.values.iter().enumerate() {
        writeln!(w, "{},{}", fmt_f64(sig.grid.time(i)), fmt_f64(*v))?;
    }
    Ok(())
}

/// Solution CSV: `t',value` with residual metadata in the header.
pub fn write_projection_csv(sig: &ProjectionSignal, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# detector: {}", sig.detector)?;
    writeln!(w, "# geometry: {:?}", sig.geometry)?;
    writeln!(w, "# residual_norm: {}", fmt_f64(sig.residual_norm))?;
    writeln!(w, "# solution_norm: {}", fmt_f64(sig.solution_norm))?;
    writeln!(w, "# lambda: {}", fmt_f64(sig.lambda))?;
    writeln!(w, "tprime,value")?;
    for (t, v) in sig.times.iter().zip(&sig.values) {
        writeln!(w, "{},{}", fmt_f64(*t), fmt_f64(*v))?;
    }
    Ok(())
}

const VOLUME_MAGIC: &[u8; 8] = b"TAVOL01\n";

/// Flat binary volume: magic, extent (f64 LE), m (u32 LE), then m³ f64 LE
/// values in x-major order.
pub fn write_volume_binary(vol: &VolumeGrid, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(VOLUME_MAGIC)?;
    w.write_all(&vol.extent.to_le_bytes())?;
    w.write_all(&(vol.m as u32).to_le_bytes())?;
    for v in &vol.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_volume_binary(path: &Path) -> Result<VolumeGrid> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != VOLUME_MAGIC {
        return Err(Error::Parse("bad volume magic".into()));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let extent = f64::from_le_bytes(b8);
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let m = u32::from_le_bytes(b4) as usize;
    let mut values = vec![0.0; m * m * m];
    for v in values.iter_mut() {
        r.read_exact(&mut b8)?;
        *v = f64::from_le_bytes(b8);
    }
    VolumeGrid::from_values(extent, m, values)
}

/// One CSV per z-slice for plotting: rows y, columns x.
pub fn write_volume_slices(vol: &VolumeGrid, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for k in 0..vol.m {
        let path = dir.join(format!("{stem}_z{k:03}.csv"));
        let mut w = BufWriter::new(File::create(path)?);
        for j in 0..vol.m {
            let mut line = String::new();
            for i in 0..vol.m {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&fmt_f64(vol.get(i, j, k)));
            }
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}
