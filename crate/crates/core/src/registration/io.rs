//! Point-cloud file formats.
//!
//! Binary `PCB1`: magic `"PCB1"`, little-endian `u32` point count, `u8`
//! has-normals flag, then `N×3 f32` points and, when flagged, `N×3 f32`
//! normals. ASCII XYZ: one `x y z` triple per line for interoperability.

use super::{PointCloud, RegistrationError};
use nalgebra::{Point3, Vector3};
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"PCB1";

pub fn write_pcb<W: Write>(cloud: &PointCloud, mut out: W) -> Result<(), RegistrationError> {
    out.write_all(MAGIC)?;
    out.write_all(&(cloud.len() as u32).to_le_bytes())?;
    out.write_all(&[u8::from(cloud.normals().is_some())])?;
    for p in cloud.points() {
        for v in [p.x, p.y, p.z] {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    if let Some(normals) = cloud.normals() {
        for n in normals {
            for v in [n.x, n.y, n.z] {
                out.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_pcb<R: Read>(mut input: R, frame_id: &str) -> Result<PointCloud, RegistrationError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(RegistrationError::MalformedFile("bad magic".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let n = u32::from_le_bytes(word) as usize;
    let mut flag = [0u8; 1];
    input.read_exact(&mut flag)?;
    let has_normals = match flag[0] {
        0 => false,
        1 => true,
        other => {
            return Err(RegistrationError::MalformedFile(format!(
                "bad has_normals flag {other}"
            )))
        }
    };
    let read_f32 = |input: &mut R| -> Result<f64, RegistrationError> {
        let mut b = [0u8; 4];
        input.read_exact(&mut b)?;
        Ok(f32::from_le_bytes(b) as f64)
    };
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let x = read_f32(&mut input)?;
        let y = read_f32(&mut input)?;
        let z = read_f32(&mut input)?;
        points.push(Point3::new(x, y, z));
    }
    let cloud = PointCloud::new(points, frame_id)?;
    if !has_normals {
        return Ok(cloud);
    }
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let x = read_f32(&mut input)?;
        let y = read_f32(&mut input)?;
        let z = read_f32(&mut input)?;
        // f32 storage loses a little length precision; renormalize.
        let v = Vector3::new(x, y, z);
        let norm = v.norm();
        if norm <= 0.0 {
            return Err(RegistrationError::MalformedFile("zero-length normal".into()));
        }
        normals.push(v / norm);
    }
    cloud.with_normals(normals)
}

pub fn read_xyz<R: Read>(mut input: R, frame_id: &str) -> Result<PointCloud, RegistrationError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut points = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut next = || -> Result<f64, RegistrationError> {
            fields
                .next()
                .ok_or_else(|| {
                    RegistrationError::MalformedFile(format!("line {}: missing coordinate", line_no + 1))
                })?
                .parse::<f64>()
                .map_err(|e| RegistrationError::MalformedFile(format!("line {}: {e}", line_no + 1)))
        };
        let x = next()?;
        let y = next()?;
        let z = next()?;
        points.push(Point3::new(x, y, z));
    }
    PointCloud::new(points, frame_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pcb_round_trip_with_normals() {
        let cloud = PointCloud::new(
            vec![Point3::new(1.0, 2.0, 3.0), Point3::new(-0.5, 0.25, 9.0)],
            "t",
        )
        .unwrap()
        .with_normals(vec![Vector3::z(), Vector3::x()])
        .unwrap();
        let mut buf = Vec::new();
        write_pcb(&cloud, &mut buf).unwrap();
        let back = read_pcb(buf.as_slice(), "t").unwrap();
        assert_eq!(back.len(), 2);
        assert!(back.normals().is_some());
        for (a, b) in cloud.points().iter().zip(back.points()) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn pcb_rejects_bad_magic() {
        let buf = b"NOPE\x00\x00\x00\x00\x00".to_vec();
        assert!(matches!(
            read_pcb(buf.as_slice(), "t"),
            Err(RegistrationError::MalformedFile(_))
        ));
    }

    #[test]
    fn xyz_parses_and_skips_comments() {
        let text = "# header\n1 2 3\n4.5 -6 7e-1\n";
        let cloud = read_xyz(text.as_bytes(), "t").unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.points()[1], Point3::new(4.5, -6.0, 0.7));
        assert!(read_xyz("1 2".as_bytes(), "t").is_err());
    }

    proptest! {
        #[test]
        fn pcb_round_trip_preserves_f32_points(pts in prop::collection::vec((-100.0f32..100.0, -100.0f32..100.0, -100.0f32..100.0), 0..50)) {
            let cloud = PointCloud::new(
                pts.iter().map(|&(x, y, z)| Point3::new(x as f64, y as f64, z as f64)).collect(),
                "t",
            ).unwrap();
            let mut buf = Vec::new();
            write_pcb(&cloud, &mut buf).unwrap();
            let back = read_pcb(buf.as_slice(), "t").unwrap();
            prop_assert_eq!(back.len(), cloud.len());
            for (a, b) in cloud.points().iter().zip(back.points()) {
                prop_assert_eq!(a, b);
            }
        }
    }
}
