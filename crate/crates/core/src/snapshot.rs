//! Snapshot and report writers: CSV (canonical, full-precision round-trip),
//! legacy-VTK ASCII for visualization, run manifests, and the step log /
//! conservation observers.

use crate::error::{Error, Result};
use crate::fluid::{CellAverages, FluidEos};
use crate::integrator::{Observer, SimulationState, StepDiag};
use crate::mesh::Mesh;
use crate::solid::MaterialPoint;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

pub const CELLS_HEADER: &str = "cell,xc,yc,volume,n,rho_bar,momx_bar,momy_bar,en_bar,p,theta,mach";
pub const POINTS_HEADER: &str = "point,x,y,vx,vy,volume,mass,sxx,syy,sxy,szz,phi";

/// Fluid cell averages plus derived fields, one row per cell. Floats are
/// written with the shortest round-trippable decimal representation.
pub fn write_cells_csv(
    path: &Path,
    mesh: &Mesh,
    avg: &CellAverages,
    n_cell: &[f64],
    eos: &FluidEos,
) -> Result<()> {
    let mut s = String::with_capacity(mesh.n_cells() * 96);
    s.push_str(CELLS_HEADER);
    s.push('\n');
    for ci in 0..mesh.n_cells() {
        let bar = &avg.bar[ci];
        let u = *bar * (1.0 / n_cell[ci]);
        let (p, theta, mach) = match eos.evaluate(&u) {
            Ok(out) => (out.p, out.theta, u.vel().norm() / out.a),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN),
        };
        let c = mesh.centroid[ci];
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            ci, c.x, c.y, mesh.volume[ci], n_cell[ci], bar.rho, bar.mom.x, bar.mom.y, bar.en,
            p, theta, mach
        )
        .unwrap();
    }
    fs::write(path, s).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub cell: usize,
    pub n: f64,
    pub rho_bar: f64,
    pub mom_bar: [f64; 2],
    pub en_bar: f64,
}

pub fn read_cells_csv(path: &Path) -> Result<Vec<CellRecord>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (lno, line) in text.lines().enumerate() {
        if lno == 0 {
            if line != CELLS_HEADER {
                return Err(Error::config(format!("unexpected cells.csv header: {line}")));
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(Error::config(format!("malformed cells.csv line {lno}")));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse()
                .map_err(|_| Error::config(format!("bad float in cells.csv line {lno}")))
        };
        out.push(CellRecord {
            cell: f[0].parse().unwrap_or(0),
            n: num(4)?,
            rho_bar: num(5)?,
            mom_bar: [num(6)?, num(7)?],
            en_bar: num(8)?,
        });
    }
    Ok(out)
}

pub fn write_points_csv(path: &Path, points: &[MaterialPoint], rho_s: f64) -> Result<()> {
    let mut s = String::with_capacity(points.len() * 96);
    s.push_str(POINTS_HEADER);
    s.push('\n');
    for (pi, p) in points.iter().enumerate() {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            pi,
            p.x.x,
            p.x.y,
            p.vel.x,
            p.vel.y,
            p.vol,
            p.mass,
            p.stress.xx,
            p.stress.yy,
            p.stress.xy,
            p.stress.zz,
            p.density() / rho_s
        )
        .unwrap();
    }
    fs::write(path, s).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub x: [f64; 2],
    pub vel: [f64; 2],
    pub volume: f64,
    pub mass: f64,
}

pub fn read_points_csv(path: &Path) -> Result<Vec<PointRecord>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (lno, line) in text.lines().enumerate() {
        if lno == 0 {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(Error::config(format!("malformed points.csv line {lno}")));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse()
                .map_err(|_| Error::config(format!("bad float in points.csv line {lno}")))
        };
        out.push(PointRecord {
            x: [num(1)?, num(2)?],
            vel: [num(3)?, num(4)?],
            volume: num(5)?,
            mass: num(6)?,
        });
    }
    Ok(out)
}

/// Legacy-VTK ASCII unstructured grid with the fluid cell data.
pub fn write_fluid_vtk(
    path: &Path,
    mesh: &Mesh,
    avg: &CellAverages,
    n_cell: &[f64],
    eos: &FluidEos,
) -> Result<()> {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nfluid state\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {} double", mesh.nodes.len()).unwrap();
    for p in &mesh.nodes {
        writeln!(s, "{} {} 0", p.x, p.y).unwrap();
    }
    let list_len: usize = mesh.cells.iter().map(|c| c.len() + 1).sum();
    writeln!(s, "CELLS {} {}", mesh.n_cells(), list_len).unwrap();
    for c in &mesh.cells {
        let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
        writeln!(s, "{} {}", c.len(), ids.join(" ")).unwrap();
    }
    writeln!(s, "CELL_TYPES {}", mesh.n_cells()).unwrap();
    for c in &mesh.cells {
        writeln!(s, "{}", if c.len() == 3 { 5 } else { 9 }).unwrap();
    }
    writeln!(s, "CELL_DATA {}", mesh.n_cells()).unwrap();
    s.push_str("SCALARS rho_bar double 1\nLOOKUP_TABLE default\n");
    for b in &avg.bar {
        writeln!(s, "{}", b.rho).unwrap();
    }
    s.push_str("SCALARS porosity double 1\nLOOKUP_TABLE default\n");
    for v in n_cell {
        writeln!(s, "{}", v).unwrap();
    }
    s.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for (ci, b) in avg.bar.iter().enumerate() {
        let u = *b * (1.0 / n_cell[ci]);
        writeln!(s, "{}", eos.evaluate(&u).map(|o| o.p).unwrap_or(f64::NAN)).unwrap();
    }
    s.push_str("VECTORS velocity double\n");
    for (ci, b) in avg.bar.iter().enumerate() {
        let _ = ci;
        let v = b.vel();
        writeln!(s, "{} {} 0", v.x, v.y).unwrap();
    }
    fs::write(path, s).map_err(io_err(path))
}

/// Legacy-VTK ASCII point cloud with material point data.
pub fn write_points_vtk(path: &Path, points: &[MaterialPoint], rho_s: f64) -> Result<()> {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nmaterial points\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {} double", points.len()).unwrap();
    for p in points {
        writeln!(s, "{} {} 0", p.x.x, p.x.y).unwrap();
    }
    writeln!(s, "CELLS {} {}", points.len(), 2 * points.len()).unwrap();
    for i in 0..points.len() {
        writeln!(s, "1 {}", i).unwrap();
    }
    writeln!(s, "CELL_TYPES {}", points.len()).unwrap();
    for _ in 0..points.len() {
        s.push_str("1\n");
    }
    writeln!(s, "POINT_DATA {}", points.len()).unwrap();
    s.push_str("SCALARS phi double 1\nLOOKUP_TABLE default\n");
    for p in points {
        writeln!(s, "{}", p.density() / rho_s).unwrap();
    }
    s.push_str("VECTORS velocity double\n");
    for p in points {
        writeln!(s, "{} {} 0", p.vel.x, p.vel.y).unwrap();
    }
    fs::write(path, s).map_err(io_err(path))
}

pub fn write_manifest(path: &Path, config_hash: &str, dt_policy: &str) -> Result<()> {
    let s = format!(
        "code_version={}\nconfig_sha256={}\ndt_policy={}\n",
        env!("CARGO_PKG_VERSION"),
        config_hash,
        dt_policy
    );
    fs::write(path, s).map_err(io_err(path))
}

pub fn conservation_report(state: &SimulationState) -> String {
    let f = state.total_fluid();
    format!(
        "t={} step={} fluid_mass={} fluid_momx={} fluid_momy={} fluid_energy={} solid_mass={}\n",
        state.time,
        state.step,
        f.rho,
        f.mom.x,
        f.mom.y,
        f.en,
        state.total_solid_mass()
    )
}

/// Writes numbered CSV (always) and VTK (optional) snapshots every
/// `every_steps` steps.
pub struct SnapshotWriter {
    pub dir: PathBuf,
    pub every_steps: u64,
    pub vtk: bool,
    pub eos: FluidEos,
    pub rho_s: f64,
    pub frames: usize,
}

impl SnapshotWriter {
    pub fn write_now(&mut self, state: &SimulationState) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(io_err(&self.dir))?;
        let n_cell = cell_porosity(state);
        let tag = format!("{:06}", self.frames);
        write_cells_csv(
            &self.dir.join(format!("cells_{tag}.csv")),
            &state.mesh,
            &state.avg,
            &n_cell,
            &self.eos,
        )?;
        if !state.points.is_empty() {
            write_points_csv(
                &self.dir.join(format!("points_{tag}.csv")),
                &state.points,
                self.rho_s,
            )?;
        }
        if self.vtk {
            write_fluid_vtk(
                &self.dir.join(format!("fluid_{tag}.vtk")),
                &state.mesh,
                &state.avg,
                &n_cell,
                &self.eos,
            )?;
            if !state.points.is_empty() {
                write_points_vtk(
                    &self.dir.join(format!("points_{tag}.vtk")),
                    &state.points,
                    self.rho_s,
                )?;
            }
        }
        self.frames += 1;
        Ok(())
    }
}

/// Cell porosity from the latest nodal field (ones when no solid phase).
pub fn cell_porosity(state: &SimulationState) -> Vec<f64> {
    match &state.fefv {
        Some(fefv) if !state.n_i.is_empty() => (0..state.mesh.n_cells())
            .map(|c| fefv.cell_average(c, &state.n_i).clamp(crate::solid::POROSITY_MIN, 1.0))
            .collect(),
        _ => vec![1.0; state.mesh.n_cells()],
    }
}

impl Observer for SnapshotWriter {
    fn on_step(&mut self, state: &SimulationState, _diag: &StepDiag) -> Result<()> {
        if self.every_steps > 0 && state.step % self.every_steps == 0 {
            self.write_now(state)?;
        }
        Ok(())
    }
}

/// Machine-parseable progress log: `step= t= dt= bound= ...` key=value rows.
pub struct StepLogger<W: std::io::Write> {
    pub sink: W,
    pub every_steps: u64,
}

impl<W: std::io::Write> Observer for StepLogger<W> {
    fn on_step(&mut self, state: &SimulationState, diag: &StepDiag) -> Result<()> {
        if self.every_steps == 0 || state.step % self.every_steps != 0 {
            return Ok(());
        }
        let f = state.total_fluid();
        writeln!(
            self.sink,
            "step={} t={:.9e} dt={:.6e} bound={} fluid_mass={:.12e} fluid_en={:.9e} solid_mass={:.12e} llf={} outlet_fb={}",
            state.step,
            state.time,
            diag.dt,
            diag.binding,
            f.rho,
            f.en,
            state.total_solid_mass(),
            diag.fluid.llf_fallbacks,
            diag.fluid.outlet_wall_fallbacks,
        )
        .map_err(|e| Error::Io {
            path: "<log>".into(),
            source: e,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::FluidState;
    use crate::math::v2;
    use crate::mesh::build_cartesian_mesh;

    fn eos() -> FluidEos {
        FluidEos::IdealGas {
            gamma: 1.4,
            r: 287.0,
            eta0: 0.0,
            k_f: 0.0,
        }
    }

    #[test]
    fn cells_csv_roundtrips_bit_exact() {
        let dir = std::env::temp_dir().join("fvmpm_csv_test");
        fs::create_dir_all(&dir).unwrap();
        let mesh = build_cartesian_mesh(3, 2, v2(0.0, 0.0), v2(1.0, 1.0)).unwrap();
        let avg = CellAverages {
            bar: (0..mesh.n_cells())
                .map(|i| {
                    let rho = 1.0 + (i as f64) * 0.137911 + 1.0 / 3.0;
                    FluidState::new(rho, v2(rho * 0.1, -rho * 7.0 / 11.0), rho * 2.123e5)
                })
                .collect(),
        };
        let n_cell: Vec<f64> = (0..mesh.n_cells()).map(|i| 0.4 + 0.01 * i as f64).collect();
        let path = dir.join("cells.csv");
        write_cells_csv(&path, &mesh, &avg, &n_cell, &eos()).unwrap();
        let back = read_cells_csv(&path).unwrap();
        assert_eq!(back.len(), mesh.n_cells());
        for (i, r) in back.iter().enumerate() {
            assert_eq!(r.rho_bar, avg.bar[i].rho);
            assert_eq!(r.mom_bar[0], avg.bar[i].mom.x);
            assert_eq!(r.mom_bar[1], avg.bar[i].mom.y);
            assert_eq!(r.en_bar, avg.bar[i].en);
            assert_eq!(r.n, n_cell[i]);
        }
    }

    #[test]
    fn empty_point_set_writes_valid_file() {
        let dir = std::env::temp_dir().join("fvmpm_csv_empty");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("points.csv");
        write_points_csv(&path, &[], 2650.0).unwrap();
        let back = read_points_csv(&path).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn vtk_schema_sections_in_order() {
        let dir = std::env::temp_dir().join("fvmpm_vtk_test");
        fs::create_dir_all(&dir).unwrap();
        let mesh = build_cartesian_mesh(2, 2, v2(0.0, 0.0), v2(1.0, 1.0)).unwrap();
        let avg = CellAverages::uniform(
            mesh.n_cells(),
            FluidState::new(1.0, v2(0.0, 0.0), 2.5e5),
        );
        let n_cell = vec![1.0; mesh.n_cells()];
        let path = dir.join("fluid.vtk");
        write_fluid_vtk(&path, &mesh, &avg, &n_cell, &eos()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let order = [
            "# vtk DataFile Version 3.0",
            "ASCII",
            "DATASET UNSTRUCTURED_GRID",
            "POINTS 9 double",
            "CELLS 4 20",
            "CELL_TYPES 4",
            "CELL_DATA 4",
            "SCALARS rho_bar double 1",
            "VECTORS velocity double",
        ];
        let mut pos = 0;
        for marker in order {
            let found = text[pos..]
                .find(marker)
                .unwrap_or_else(|| panic!("missing or out-of-order marker: {marker}"));
            pos += found;
        }
        // Counts line up: 9 node lines after POINTS.
        let after = text.split("POINTS 9 double\n").nth(1).unwrap();
        assert_eq!(after.lines().take(9).count(), 9);
    }
}
