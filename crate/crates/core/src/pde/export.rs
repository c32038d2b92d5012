use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{Control, State, Trajectory};

/// Long-format CSV `t,x,u`, writing every `stride`-th time level plus the last one.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, stride: usize) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let stride = stride.max(1);
    let last = traj.states.len() - 1;
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "t,x,u")?;
        for (k, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
            if k % stride != 0 && k != last {
                continue;
            }
            for (j, u) in s.values.iter().enumerate() {
                writeln!(w, "{:.16e},{:.16e},{:.16e}", t, s.grid.x(j), u)?;
            }
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

/// CSV `t,f`.
pub fn write_control_csv(path: &Path, f: &Control) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "t,f")?;
        for (t, v) in f.times().iter().zip(&f.samples) {
            writeln!(w, "{:.16e},{:.16e}", t, v)?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

/// Read a control written by [`write_control_csv`].
pub fn read_control_csv(path: &Path) -> Result<Control> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 {
            if line.trim() != "t,f" {
                return Err(Error::InvalidConfig(format!(
                    "{}: unexpected header {line:?}",
                    path.display()
                )));
            }
            continue;
        }
        let mut cols = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|v| v.trim().parse().ok()).ok_or_else(|| {
                Error::InvalidConfig(format!("{}: malformed row {}", path.display(), i + 1))
            })
        };
        times.push(parse(cols.next())?);
        samples.push(parse(cols.next())?);
    }
    let horizon = *times
        .last()
        .ok_or_else(|| Error::InvalidConfig(format!("{}: no rows", path.display())))?;
    Control::new(horizon, samples)
}

/// JSON snapshot of a state.
pub fn write_state_json(path: &Path, state: &State) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), state)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::Grid;

    #[test]
    fn control_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let f = Control::from_fn(0.7, 37, |t| (3.0 * t).sin() / 7.0 - t);
        write_control_csv(&path, &f).unwrap();
        let back = read_control_csv(&path).unwrap();
        assert_eq!(back.samples, f.samples);
        assert!((back.horizon - f.horizon).abs() < 1e-15);
    }

    #[test]
    fn malformed_control_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,g\n0,1\n").unwrap();
        assert!(matches!(
            read_control_csv(&path),
            Err(Error::InvalidConfig(_))
        ));
        std::fs::write(&path, "t,f\n0,x\n").unwrap();
        assert!(matches!(
            read_control_csv(&path),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            read_control_csv(&dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn trajectory_csv_keeps_last_level() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let grid = Grid::new(4).unwrap();
        let traj = Trajectory {
            times: vec![0.0, 0.5, 1.0],
            states: vec![State::zeros(grid); 3],
            flux0: Vec::new(),
            step_flux: Vec::new(),
            theta: 0.5,
        };
        write_trajectory_csv(&path, &traj, 2).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 5);
        write_trajectory_csv(&path, &traj, 5).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap().lines().count(),
            1 + 2 * 5
        );
    }
}
