//! Triangulated particle boundaries for the electrostatic eigenmode solver.
//!
//! Meshes are flat-panel collections (centroid, outward normal, area). The
//! generators emit mirror-symmetric meshes: quads are split into four
//! triangles about their center so that reflections map the element set onto
//! itself, which keeps degenerate mode pairs clean.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One flat boundary element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    /// Centroid s = (Sx, Sy, sz) in nm.
    pub centroid: [f64; 3],
    /// Outward unit normal.
    pub normal: [f64; 3],
    /// Area in nm².
    pub area: f64,
    /// Corner vertices when generated in-process; imported meshes carry only
    /// centroid data and fall back to single-point quadrature.
    pub vertices: Option<[[f64; 3]; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshProvenance {
    TrianglePrism {
        side: f64,
        thickness: f64,
        corner_rounding: f64,
    },
    Sphere {
        radius: f64,
    },
    File(String),
}

/// Closed triangulated surface.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub elements: Vec<Element>,
    pub provenance: MeshProvenance,
}

impl SurfaceMesh {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }

    /// |Σ area·n̂| / total area; near zero for closed surfaces.
    pub fn closure_defect(&self) -> f64 {
        let mut s = [0.0f64; 3];
        for e in &self.elements {
            for d in 0..3 {
                s[d] += e.area * e.normal[d];
            }
        }
        (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt() / self.total_area()
    }

    /// Typical element radius √(area/π), used as the profile regularization
    /// scale of each element.
    pub fn element_radius(&self, idx: usize) -> f64 {
        (self.elements[idx].area / PI).sqrt()
    }

    /// Enclosed volume from the divergence theorem, Σ a (s·n̂)/3; positive
    /// for consistently outward-oriented closed surfaces.
    pub fn enclosed_volume(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| {
                e.area
                    * (e.centroid[0] * e.normal[0]
                        + e.centroid[1] * e.normal[1]
                        + e.centroid[2] * e.normal[2])
            })
            .sum::<f64>()
            / 3.0
    }
}

/// Rejects meshes with coincident collocation points, which would produce
/// singular kernel entries.
fn validate_distinct_centroids(elements: &[Element]) -> Result<()> {
    let scale = elements
        .iter()
        .map(|e| e.area.sqrt())
        .fold(f64::MAX, f64::min);
    let tol2 = (1e-6 * scale) * (1e-6 * scale);
    for i in 0..elements.len() {
        for j in (i + 1)..elements.len() {
            let a = elements[i].centroid;
            let b = elements[j].centroid;
            let d2 =
                (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
            if d2 < tol2 {
                return Err(Error::numeric(format!(
                    "mesh generation produced coincident elements near ({:.3}, {:.3}, {:.3})",
                    a[0], a[1], a[2]
                )));
            }
        }
    }
    Ok(())
}

fn push_triangle(elements: &mut Vec<Element>, a: [f64; 3], b: [f64; 3], c: [f64; 3]) {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let norm = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    if norm <= 0.0 {
        return; // degenerate sliver
    }
    elements.push(Element {
        centroid: [
            (a[0] + b[0] + c[0]) / 3.0,
            (a[1] + b[1] + c[1]) / 3.0,
            (a[2] + b[2] + c[2]) / 3.0,
        ],
        normal: [cross[0] / norm, cross[1] / norm, cross[2] / norm],
        area: 0.5 * norm,
        vertices: Some([a, b, c]),
    });
}

/// Splits the planar quad (a, b, c, d) into four triangles about its center.
/// Winding of (a, b, c, d) fixes the normal direction.
fn push_quad(elements: &mut Vec<Element>, quad: [[f64; 3]; 4]) {
    let center = [
        (quad[0][0] + quad[1][0] + quad[2][0] + quad[3][0]) / 4.0,
        (quad[0][1] + quad[1][1] + quad[2][1] + quad[3][1]) / 4.0,
        (quad[0][2] + quad[1][2] + quad[2][2] + quad[3][2]) / 4.0,
    ];
    for k in 0..4 {
        push_triangle(elements, quad[k], quad[(k + 1) % 4], center);
    }
}

/// Quasi-uniform icosphere triangulation. Each icosahedron face is split
/// into f² sub-triangles projected onto the sphere (20·f² elements total);
/// collocation points sit on the true surface and panel areas are rescaled
/// so they sum to the exact 4πr².
pub fn build_sphere_mesh(radius: f64, elements_target: usize) -> Result<SurfaceMesh> {
    if !(radius > 0.0) {
        return Err(Error::parameter(format!(
            "sphere radius must be positive, got {radius}"
        )));
    }
    if elements_target < 20 {
        return Err(Error::parameter("sphere needs at least 20 elements"));
    }
    let freq = ((elements_target as f64 / 20.0).sqrt().round() as usize).max(1);

    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let raw: [[f64; 3]; 12] = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    const FACES: [[usize; 3]; 20] = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let project = |p: [f64; 3]| -> [f64; 3] {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        [radius * p[0] / n, radius * p[1] / n, radius * p[2] / n]
    };
    let verts: Vec<[f64; 3]> = raw.iter().map(|&p| project(p)).collect();

    let f = freq as f64;
    let bary = |a: [f64; 3], b: [f64; 3], c: [f64; 3], i: usize, j: usize| -> [f64; 3] {
        let (wi, wj) = (i as f64 / f, j as f64 / f);
        let wa = 1.0 - wi - wj;
        project([
            wa * a[0] + wi * b[0] + wj * c[0],
            wa * a[1] + wi * b[1] + wj * c[1],
            wa * a[2] + wi * b[2] + wj * c[2],
        ])
    };

    let mut elements = Vec::new();
    for face in FACES {
        let (a, b, c) = (verts[face[0]], verts[face[1]], verts[face[2]]);
        for i in 0..freq {
            for j in 0..(freq - i) {
                let p00 = bary(a, b, c, i, j);
                let p10 = bary(a, b, c, i + 1, j);
                let p01 = bary(a, b, c, i, j + 1);
                push_triangle(&mut elements, p00, p10, p01);
                if j + 1 < freq - i {
                    let p11 = bary(a, b, c, i + 1, j + 1);
                    push_triangle(&mut elements, p10, p11, p01);
                }
            }
        }
    }

    // curved-panel correction: collocation points on the sphere, radial
    // normals, panel areas rescaled to the exact total
    let flat_total: f64 = elements.iter().map(|e| e.area).sum();
    let scale = 4.0 * PI * radius * radius / flat_total;
    for e in &mut elements {
        let c = project(e.centroid);
        e.normal = [c[0] / radius, c[1] / radius, c[2] / radius];
        e.centroid = c;
        e.area *= scale;
    }

    Ok(SurfaceMesh {
        elements,
        provenance: MeshProvenance::Sphere { radius },
    })
}

/// Boundary samples of a corner-rounded equilateral triangle, vertex up,
/// centroid at the origin, counterclockwise with midpoint spacing. Returns
/// (point, outward in-plane unit normal) pairs.
fn rounded_triangle_boundary(
    side: f64,
    rounding: f64,
    n_edge: usize,
    n_arc: usize,
) -> Vec<([f64; 2], [f64; 2])> {
    let circumradius = side / 3.0f64.sqrt();
    let vertex_angles = [PI / 2.0, PI / 2.0 + 2.0 * PI / 3.0, PI / 2.0 + 4.0 * PI / 3.0];
    let vertices: Vec<[f64; 2]> = vertex_angles
        .iter()
        .map(|a| [circumradius * a.cos(), circumradius * a.sin()])
        .collect();
    // rounding circle centers sit 2r inside each vertex along the bisector
    let centers: Vec<[f64; 2]> = vertex_angles
        .iter()
        .map(|a| {
            let d = circumradius - 2.0 * rounding;
            [d * a.cos(), d * a.sin()]
        })
        .collect();

    let mut pts = Vec::with_capacity(3 * (n_edge + n_arc));
    for k in 0..3 {
        let v0 = vertices[k];
        let v1 = vertices[(k + 1) % 3];
        let edge = [v1[0] - v0[0], v1[1] - v0[1]];
        let elen = (edge[0] * edge[0] + edge[1] * edge[1]).sqrt();
        let dir = [edge[0] / elen, edge[1] / elen];
        let outward = [dir[1], -dir[0]]; // CCW boundary: right of travel
        let trim = 3.0f64.sqrt() * rounding;
        let start = [v0[0] + trim * dir[0], v0[1] + trim * dir[1]];
        let span = elen - 2.0 * trim;
        for j in 0..n_edge {
            let t = (j as f64 + 0.5) / n_edge as f64;
            pts.push((
                [start[0] + span * t * dir[0], start[1] + span * t * dir[1]],
                outward,
            ));
        }
        if rounding > 0.0 {
            let c = centers[(k + 1) % 3];
            let a_mid = vertex_angles[(k + 1) % 3];
            for j in 0..n_arc {
                let t = (j as f64 + 0.5) / n_arc as f64;
                let a = a_mid - PI / 3.0 + 2.0 * PI / 3.0 * t;
                let radial = [a.cos(), a.sin()];
                pts.push((
                    [c[0] + rounding * radial[0], c[1] + rounding * radial[1]],
                    radial,
                ));
            }
        } else {
            pts.push((vertices[(k + 1) % 3], {
                let a = vertex_angles[(k + 1) % 3];
                [a.cos(), a.sin()]
            }));
        }
    }
    pts
}

/// Closed surface of a corner-rounded equilateral triangular prism with a
/// smooth rim profile: quarter-circle edges joining the faces to the wall,
/// which keeps the surface-kernel spectrum inside its physical band.
pub fn build_triangle_mesh(
    side: f64,
    thickness: f64,
    elements_target: usize,
    corner_rounding: f64,
) -> Result<SurfaceMesh> {
    if !(side > 0.0) || !(thickness > 0.0) {
        return Err(Error::parameter(format!(
            "side and thickness must be positive, got side={side}, thickness={thickness}"
        )));
    }
    if corner_rounding <= 0.0 || corner_rounding >= side / 4.0 {
        return Err(Error::parameter(format!(
            "corner rounding must satisfy 0 < r < side/4, got {corner_rounding}"
        )));
    }
    if elements_target < 40 {
        return Err(Error::parameter("prism needs at least 40 elements"));
    }

    // rim (edge) rounding radius: bounded by half thickness and kept below
    // the corner radius so the inset face boundary stays smooth
    let r_e = (0.5 * thickness).min(0.75 * corner_rounding);
    let perimeter =
        3.0 * (side - 2.0 * 3.0f64.sqrt() * corner_rounding) + 2.0 * PI * corner_rounding;
    let apothem = side / (2.0 * 3.0f64.sqrt());
    let mean_face_radius = 0.5 * (apothem + side / 3.0f64.sqrt() - corner_rounding) - r_e;
    let wall_height = thickness - 2.0 * r_e;
    let quarter_arc = 0.5 * PI * r_e;

    let count_for = |h: f64| -> (usize, usize, usize, usize, usize, usize) {
        let straight = side - 2.0 * 3.0f64.sqrt() * corner_rounding;
        let n_edge = ((straight / 3.0) / h).round().max(1.0) as usize;
        let n_arc = ((2.0 * PI / 3.0 * corner_rounding) / h).round().max(1.0) as usize;
        let n_b = 3 * (n_edge + n_arc);
        let rings = (mean_face_radius / h).round().max(1.0) as usize;
        let n_prof_arc = (quarter_arc / h).round().max(1.0) as usize;
        let n_wall = if wall_height > 1e-12 {
            (wall_height / h).round().max(1.0) as usize
        } else {
            0
        };
        let profile_bands = 2 * n_prof_arc + n_wall;
        let faces = 2 * (n_b + 4 * n_b * (rings.saturating_sub(1)));
        let rim = 4 * n_b * profile_bands;
        (faces + rim, n_edge, n_arc, rings, n_prof_arc, n_wall)
    };
    let mut best: Option<(usize, f64)> = None;
    let mut h = perimeter / 6.0;
    while h > perimeter / 2000.0 {
        let (count, ..) = count_for(h);
        let diff = (count as i64 - elements_target as i64).unsigned_abs() as usize;
        if best.map_or(true, |(d, _)| diff < d) {
            best = Some((diff, h));
        }
        h *= 0.97;
    }
    let h = best.expect("non-empty scan").1;
    let (_, n_edge, n_arc, rings, n_prof_arc, n_wall) = count_for(h);

    let boundary = rounded_triangle_boundary(side, corner_rounding, n_edge, n_arc);
    let n_b = boundary.len();
    let z_top = 0.5 * thickness;

    // rim profile stations (lateral offset ξ from the silhouette, z), from
    // the top face tangent ring down to the bottom one
    let mut profile: Vec<[f64; 2]> = Vec::new();
    profile.push([-r_e, z_top]);
    for j in 1..=n_prof_arc {
        let a = 0.5 * PI * j as f64 / n_prof_arc as f64;
        profile.push([-r_e + r_e * a.sin(), z_top - r_e + r_e * a.cos()]);
    }
    for j in 1..=n_wall {
        profile.push([0.0, (z_top - r_e) - wall_height * j as f64 / n_wall as f64]);
    }
    for j in 1..=n_prof_arc {
        let a = 0.5 * PI * (1.0 + j as f64 / n_prof_arc as f64);
        profile.push([-r_e + r_e * a.sin(), -(z_top - r_e) + r_e * a.cos()]);
    }

    let station = |i: usize, k: usize| -> [f64; 3] {
        let (p, m) = boundary[i % n_b];
        let [xi, z] = profile[k];
        [p[0] + xi * m[0], p[1] + xi * m[1], z]
    };

    let mut elements = Vec::new();

    // faces: center fan plus scaled rings out to the inset (station-0) curve
    for (z, up) in [(z_top, true), (-z_top, false)] {
        let k_station = if up { 0 } else { profile.len() - 1 };
        let face_pt = |i: usize, scale: f64| -> [f64; 3] {
            let s = station(i, k_station);
            [s[0] * scale, s[1] * scale, z]
        };
        let s1 = 1.0 / rings as f64;
        for i in 0..n_b {
            let p0 = face_pt(i, s1);
            let p1 = face_pt(i + 1, s1);
            if up {
                push_triangle(&mut elements, [0.0, 0.0, z], p0, p1);
            } else {
                push_triangle(&mut elements, [0.0, 0.0, z], p1, p0);
            }
        }
        for k in 1..rings {
            let s_in = k as f64 / rings as f64;
            let s_out = (k + 1) as f64 / rings as f64;
            for i in 0..n_b {
                let a = face_pt(i, s_in);
                let b = face_pt(i + 1, s_in);
                let c = face_pt(i + 1, s_out);
                let d = face_pt(i, s_out);
                // radial-then-azimuthal winding keeps the normal along ±ẑ
                if up {
                    push_quad(&mut elements, [a, d, c, b]);
                } else {
                    push_quad(&mut elements, [a, b, c, d]);
                }
            }
        }
    }

    // rim: swept profile bands; winding (down-then-along) keeps normals outward
    for i in 0..n_b {
        for k in 0..profile.len() - 1 {
            push_quad(
                &mut elements,
                [
                    station(i, k),
                    station(i, k + 1),
                    station(i + 1, k + 1),
                    station(i + 1, k),
                ],
            );
        }
    }

    validate_distinct_centroids(&elements)?;
    Ok(SurfaceMesh {
        elements,
        provenance: MeshProvenance::TrianglePrism {
            side,
            thickness,
            corner_rounding,
        },
    })
}

/// Analytic surface area of the corner- and rim-rounded prism (test oracle).
pub fn rounded_prism_area(side: f64, thickness: f64, rounding: f64) -> f64 {
    let r_e = (0.5 * thickness).min(rounding);
    let tri = 3.0f64.sqrt() / 4.0 * side * side;
    let face_full =
        tri - 3.0 * (3.0f64.sqrt() * rounding * rounding - PI / 3.0 * rounding * rounding);
    let perimeter = 3.0 * (side - 2.0 * 3.0f64.sqrt() * rounding) + 2.0 * PI * rounding;
    // Steiner inward offset of the face by the rim radius
    let face = face_full - perimeter * r_e + PI * r_e * r_e;
    // each quarter-circle rim sweep: ∫ (P + 2πξ(α)) r_e dα over the arc
    let rim = 0.5 * PI * r_e * perimeter + 2.0 * PI * r_e * r_e * (1.0 - 0.5 * PI);
    let wall = (thickness - 2.0 * r_e) * perimeter;
    2.0 * face + 2.0 * rim + wall
}

/// Analytic volume of the corner- and rim-rounded prism (test oracle).
pub fn rounded_prism_volume(side: f64, thickness: f64, rounding: f64) -> f64 {
    let r_e = (0.5 * thickness).min(0.75 * rounding);
    let tri = 3.0f64.sqrt() / 4.0 * side * side;
    let face_full =
        tri - 3.0 * (3.0f64.sqrt() * rounding * rounding - PI / 3.0 * rounding * rounding);
    let perimeter = 3.0 * (side - 2.0 * 3.0f64.sqrt() * rounding) + 2.0 * PI * rounding;
    face_full * thickness - 2.0 * perimeter * r_e * r_e * (1.0 - PI / 4.0)
        + 2.0 * PI * r_e.powi(3) * (5.0 / 3.0 - PI / 2.0)
}

/// Writes the line-based mesh format: a count header followed by one
/// `Sx Sy sz nx ny nz area` line per element.
pub fn write_mesh_text(mesh: &SurfaceMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", mesh.len());
    for e in &mesh.elements {
        let _ = writeln!(
            out,
            "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
            e.centroid[0], e.centroid[1], e.centroid[2], e.normal[0], e.normal[1], e.normal[2],
            e.area
        );
    }
    out
}

pub fn save_mesh(mesh: &SurfaceMesh, path: &Path) -> Result<()> {
    std::fs::write(path, write_mesh_text(mesh))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn parse_mesh_text(text: &str, origin: &str) -> Result<SurfaceMesh> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::ingestion(format!("{origin}: empty mesh file")))?;
    let count: usize = header
        .trim()
        .parse()
        .map_err(|_| Error::ingestion(format!("{origin}:1: expected element count header")))?;
    let mut elements = Vec::with_capacity(count);
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                Error::ingestion(format!("{origin}:{}: malformed element line", lineno + 1))
            })?;
        if vals.len() != 7 {
            return Err(Error::ingestion(format!(
                "{origin}:{}: expected 7 fields, got {}",
                lineno + 1,
                vals.len()
            )));
        }
        let nlen = (vals[3] * vals[3] + vals[4] * vals[4] + vals[5] * vals[5]).sqrt();
        if !(nlen > 0.0) || (nlen - 1.0).abs() > 1e-6 {
            return Err(Error::ingestion(format!(
                "{origin}:{}: normal is not unit length (|n| = {nlen})",
                lineno + 1
            )));
        }
        if !(vals[6] > 0.0) {
            return Err(Error::ingestion(format!(
                "{origin}:{}: non-positive area",
                lineno + 1
            )));
        }
        elements.push(Element {
            centroid: [vals[0], vals[1], vals[2]],
            normal: [vals[3] / nlen, vals[4] / nlen, vals[5] / nlen],
            area: vals[6],
            vertices: None,
        });
    }
    if elements.len() != count {
        return Err(Error::ingestion(format!(
            "{origin}: header promises {count} elements, found {}",
            elements.len()
        )));
    }
    Ok(SurfaceMesh {
        elements,
        provenance: MeshProvenance::File(origin.to_string()),
    })
}

pub fn load_mesh(path: &Path) -> Result<SurfaceMesh> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_mesh_text(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_area_within_one_percent() {
        let mesh = build_sphere_mesh(5.0, 500).unwrap();
        let analytic = 4.0 * PI * 25.0;
        let got = mesh.total_area();
        assert!(
            (got - analytic).abs() / analytic < 0.01,
            "area {got} vs {analytic} with {} elements",
            mesh.len()
        );
    }

    #[test]
    fn sphere_normals_outward_and_unit() {
        let mesh = build_sphere_mesh(2.0, 400).unwrap();
        for e in &mesh.elements {
            let n2 = e.normal[0] * e.normal[0] + e.normal[1] * e.normal[1] + e.normal[2] * e.normal[2];
            assert!((n2.sqrt() - 1.0).abs() < 1e-12);
            let dot =
                e.normal[0] * e.centroid[0] + e.normal[1] * e.centroid[1] + e.normal[2] * e.centroid[2];
            assert!(dot > 0.0, "inward normal at {:?}", e.centroid);
        }
    }

    #[test]
    fn sphere_closure() {
        let mesh = build_sphere_mesh(5.0, 700).unwrap();
        assert!(mesh.closure_defect() < 1e-2);
    }

    #[test]
    fn prism_area_matches_closed_form() {
        let mesh = build_triangle_mesh(10.0, 2.0, 1000, 0.5).unwrap();
        let analytic = rounded_prism_area(10.0, 2.0, 0.5);
        let got = mesh.total_area();
        assert!(
            (got - analytic).abs() / analytic < 0.02,
            "area {got} vs {analytic} with {} elements",
            mesh.len()
        );
    }

    #[test]
    fn prism_closure_and_counts() {
        for target in [200usize, 800] {
            let mesh = build_triangle_mesh(10.0, 2.0, target, 0.5).unwrap();
            assert!(mesh.closure_defect() < 1e-2, "target {target}");
            let n = mesh.len() as f64;
            assert!(
                (n - target as f64).abs() / target as f64 <= 0.35,
                "count {n} too far from {target}"
            );
        }
    }

    #[test]
    fn prism_volume_positive_and_analytic() {
        let mesh = build_triangle_mesh(10.0, 2.0, 900, 0.5).unwrap();
        let got = mesh.enclosed_volume();
        let want = rounded_prism_volume(10.0, 2.0, 0.5);
        assert!(got > 0.0, "inward-facing normals: volume {got}");
        // chorded rim arcs and the corner-sweep approximation both bite here
        assert!((got - want).abs() / want < 0.05, "volume {got} vs {want}");
    }

    #[test]
    fn sphere_volume_positive_and_analytic() {
        let mesh = build_sphere_mesh(5.0, 980).unwrap();
        let got = mesh.enclosed_volume();
        let want = 4.0 / 3.0 * PI * 125.0;
        assert!(got > 0.0);
        assert!((got - want).abs() / want < 0.02, "volume {got} vs {want}");
    }

    #[test]
    fn prism_mesh_is_mirror_symmetric() {
        let mesh = build_triangle_mesh(10.0, 2.0, 400, 0.5).unwrap();
        // every centroid must have a partner under x → −x
        for e in &mesh.elements {
            let target = [-e.centroid[0], e.centroid[1], e.centroid[2]];
            let found = mesh.elements.iter().any(|f| {
                (f.centroid[0] - target[0]).abs() < 1e-9
                    && (f.centroid[1] - target[1]).abs() < 1e-9
                    && (f.centroid[2] - target[2]).abs() < 1e-9
            });
            assert!(found, "no mirror partner for {:?}", e.centroid);
        }
    }

    #[test]
    fn degenerate_thickness_rejected() {
        assert!(build_triangle_mesh(10.0, 0.0, 200, 0.5).is_err());
        assert!(build_triangle_mesh(10.0, 2.0, 200, 3.0).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let mesh = build_sphere_mesh(1.5, 120).unwrap();
        let text = write_mesh_text(&mesh);
        let back = parse_mesh_text(&text, "test").unwrap();
        assert_eq!(mesh.len(), back.len());
        for (a, b) in mesh.elements.iter().zip(&back.elements) {
            assert!((a.area - b.area).abs() < 1e-15 * a.area.max(1.0));
            assert!((a.centroid[0] - b.centroid[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn malformed_mesh_line_reports_position() {
        let err = parse_mesh_text("2\n0 0 0 0 0 1 1.0\n0 0 bad 0 0 1 1.0\n", "bad.txt")
            .unwrap_err()
            .to_string();
        assert!(err.contains("bad.txt:3"), "{err}");
    }
}
