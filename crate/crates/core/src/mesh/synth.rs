//! Block-structured generators for the synthetic geometry families.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::geom::{segments_intersect, Vec2};

use super::Mesh2D;

/// Line tags of the plate family, in interning order.
pub const PLATE_TAGS: [&str; 4] = ["arc_left", "arc_right", "wall_top", "wall_bottom"];

/// The square `[-1, 1]^2` minus the two half-disks of radius `r` centered at
/// `(±1, 0)`.
///
/// Each half is a log-polar block around its notch center. `h` sets the
/// angular resolution (edge length of a unit-radius arc); the number of
/// radial layers keeps cells close to square next to the notch.
pub fn synth_plate(r: f64, h: f64) -> Result<Mesh2D> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!("plate radius {r} outside (0, 1)")));
    }
    notched_plate(h, r, |theta, j, n| {
        if j == 0 {
            Vec2::new(0.0, -r)
        } else if j == n {
            Vec2::new(0.0, r)
        } else if 2 * j == n {
            Vec2::new(r, 0.0)
        } else {
            Vec2::new(r * theta.cos(), r * theta.sin())
        }
    })
}

/// Plate with square notches `[-1, -1 + a] x [-a, a]` (and mirror) instead
/// of half-disks, tagged like [`synth_plate`].
pub fn synth_square_notch_plate(a: f64, h: f64) -> Result<Mesh2D> {
    if !(a > 0.0 && a < 0.9) {
        return Err(Error::InvalidParameter(format!("notch half-width {a} outside (0, 0.9)")));
    }
    notched_plate(h, a, |theta, j, n| {
        if j == 0 {
            Vec2::new(0.0, -a)
        } else if j == n {
            Vec2::new(0.0, a)
        } else if 4 * j == n {
            Vec2::new(a, -a)
        } else if 4 * j == 3 * n {
            Vec2::new(a, a)
        } else {
            let (s, c) = theta.sin_cos();
            let t = (a / c).min(a / s.abs());
            Vec2::new(t * c, t * s)
        }
    })
}

fn notched_plate(h: f64, r_axis: f64, inner: impl Fn(f64, usize, usize) -> Vec2) -> Result<Mesh2D> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("edge length {h} must be positive")));
    }
    let nt = (4.0 * (PI / (4.0 * h)).ceil()).max(8.0);
    if nt > 1e5 {
        return Err(Error::InvalidParameter(format!("edge length {h} is too small")));
    }
    let nt = nt as usize;
    let dtheta = PI / nt as f64;
    let nr = ((2f64.sqrt() / r_axis).ln() / dtheta).ceil().max(2.0) as usize;

    let center = Vec2::new(-1.0, 0.0);
    let (q1, q3) = (nt / 4, 3 * nt / 4);
    // Left block in coordinates relative to its notch center.
    let mut left = Vec::with_capacity((nr + 1) * (nt + 1));
    for i in 0..=nr {
        for j in 0..=nt {
            let theta = -FRAC_PI_2 + j as f64 * dtheta;
            let outer = if j == q1 {
                Vec2::new(1.0, -1.0)
            } else if j == q3 {
                Vec2::new(1.0, 1.0)
            } else if j == 0 {
                Vec2::new(0.0, -1.0)
            } else if j == nt {
                Vec2::new(0.0, 1.0)
            } else if j > q1 && j < q3 {
                Vec2::new(1.0, if 2 * j == nt { 0.0 } else { theta.tan() })
            } else {
                let y = if j > q3 { 1.0 } else { -1.0 };
                Vec2::new(y * theta.cos() / theta.sin(), y)
            };
            let p = if i == 0 {
                inner(theta, j, nt)
            } else if i == nr {
                outer
            } else {
                let a = inner(theta, j, nt);
                let (ra, rb) = (a.norm(), outer.norm());
                let rho = ra * (rb / ra).powf(i as f64 / nr as f64);
                if j == 0 || j == nt {
                    Vec2::new(0.0, rho * outer.y.signum())
                } else {
                    outer * (rho / rb)
                }
            };
            left.push(center + p);
        }
    }

    let lidx = |i: usize, j: usize| i * (nt + 1) + j;
    let nleft = left.len();
    let mut vertices = left.clone();
    let mut right_idx = vec![usize::MAX; nleft];
    for i in 0..=nr {
        for j in 0..=nt {
            let k = lidx(i, j);
            if i == nr && (q1..=q3).contains(&j) {
                right_idx[k] = k;
            } else {
                right_idx[k] = vertices.len();
                let p = left[k];
                vertices.push(Vec2::new(-p.x, p.y));
            }
        }
    }

    let mut triangles = Vec::with_capacity(4 * nr * nt);
    for i in 0..nr {
        for j in 0..nt {
            let (a, b, c, d) = (lidx(i, j), lidx(i + 1, j), lidx(i + 1, j + 1), lidx(i, j + 1));
            let split_ac = (left[a] - left[c]).norm2() <= (left[b] - left[d]).norm2();
            let quads = if split_ac { [[a, b, c], [a, c, d]] } else { [[a, b, d], [b, c, d]] };
            for t in quads {
                triangles.push(t);
            }
            for t in quads {
                triangles.push([right_idx[t[0]], right_idx[t[2]], right_idx[t[1]]]);
            }
        }
    }

    let mut edges = Vec::new();
    for (map, arc) in [(None, "arc_left"), (Some(&right_idx), "arc_right")] {
        let m = |k: usize| map.map_or(k, |r: &Vec<usize>| r[k]);
        for j in 0..nt {
            edges.push((m(lidx(0, j)), m(lidx(0, j + 1)), arc.to_string()));
        }
        for i in 0..nr {
            edges.push((m(lidx(i, nt)), m(lidx(i + 1, nt)), "wall_top".to_string()));
            edges.push((m(lidx(i, 0)), m(lidx(i + 1, 0)), "wall_bottom".to_string()));
        }
        for j in 0..nt {
            let tag = if j < q1 {
                "wall_bottom"
            } else if j >= q3 {
                "wall_top"
            } else {
                continue;
            };
            edges.push((m(lidx(nr, j)), m(lidx(nr, j + 1)), tag.to_string()));
        }
    }
    let tracked = BTreeMap::from([
        ("bottom_left".to_string(), lidx(0, 0)),
        ("top_left".to_string(), lidx(0, nt)),
        ("bottom_right".to_string(), right_idx[lidx(0, 0)]),
        ("top_right".to_string(), right_idx[lidx(0, nt)]),
    ]);
    Mesh2D::new(vertices, triangles, edges, tracked)
}

/// Notch radii `R_i = 0.2 + 0.6 i / n`, `i = 1..=n`, of a plate family.
pub fn plate_family_radii(n: usize) -> Vec<f64> {
    (1..=n).map(|i| 0.2 + 0.6 * i as f64 / n as f64).collect()
}

/// Radical inverse of `index` in `base` (one Halton coordinate).
pub fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Parameters of a NACA 4-digit O-mesh.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AirfoilParams {
    /// Maximum camber (fraction of chord).
    pub m: f64,
    /// Chordwise position of maximum camber.
    pub p: f64,
    /// Maximum thickness.
    pub t: f64,
    /// Number of vertices on the wing (even).
    pub n_boundary: usize,
    pub farfield_radius: f64,
    /// Radial layers; derived from `n_boundary` when absent.
    #[serde(default)]
    pub n_layers: Option<usize>,
}

impl AirfoilParams {
    pub fn naca(m: f64, p: f64, t: f64) -> Self {
        AirfoilParams { m, p, t, n_boundary: 80, farfield_radius: 5.0, n_layers: None }
    }
}

/// Parameter box of a sampled airfoil family.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AirfoilRanges {
    pub m: [f64; 2],
    pub p: [f64; 2],
    pub t: [f64; 2],
}

impl Default for AirfoilRanges {
    fn default() -> Self {
        AirfoilRanges { m: [0.0, 0.04], p: [0.3, 0.6], t: [0.08, 0.16] }
    }
}

/// `n` airfoils with `(m, p, t)` from the Halton sequence in bases 2, 3, 5,
/// starting after `seed` points; mesh settings come from `base`.
pub fn airfoil_family(n: usize, seed: u64, ranges: &AirfoilRanges, base: &AirfoilParams) -> Vec<AirfoilParams> {
    let lerp = |r: [f64; 2], u: f64| r[0] + (r[1] - r[0]) * u;
    (0..n)
        .map(|i| {
            let k = seed as usize + i + 1;
            AirfoilParams {
                m: lerp(ranges.m, halton(k, 2)),
                p: lerp(ranges.p, halton(k, 3)),
                t: lerp(ranges.t, halton(k, 5)),
                ..*base
            }
        })
        .collect()
}

fn camber(m: f64, p: f64, x: f64) -> (f64, f64) {
    if m == 0.0 {
        (0.0, 0.0)
    } else if x < p {
        (m / (p * p) * (2.0 * p * x - x * x), 2.0 * m / (p * p) * (p - x))
    } else {
        let q = (1.0 - p) * (1.0 - p);
        (m / q * ((1.0 - 2.0 * p) + 2.0 * p * x - x * x), 2.0 * m / q * (p - x))
    }
}

/// Closed-trailing-edge NACA 4-digit profile with cosine spacing.
///
/// Points start at the trailing edge `(1, 0)`, run over the upper surface to
/// the leading edge `(0, 0)` at index `n_half`, and return along the lower
/// surface.
pub fn naca4_profile(m: f64, p: f64, t: f64, n_half: usize) -> Vec<Vec2> {
    let thickness = |x: f64| {
        5.0 * t
            * (0.2969 * x.sqrt() - 0.1260 * x - 0.3516 * x * x + 0.2843 * x.powi(3)
                - 0.1036 * x.powi(4))
    };
    let surface = |k: usize, upper: bool| -> Vec2 {
        if k == 0 {
            return Vec2::ZERO;
        }
        if k == n_half {
            return Vec2::new(1.0, 0.0);
        }
        let x = 0.5 * (1.0 - (PI * k as f64 / n_half as f64).cos());
        let yt = thickness(x);
        let (yc, dyc) = camber(m, p, x);
        let th = dyc.atan();
        let s = if upper { 1.0 } else { -1.0 };
        Vec2::new(x - s * yt * th.sin(), yc + s * yt * th.cos())
    };
    let mut pts = Vec::with_capacity(2 * n_half);
    for k in (1..=n_half).rev() {
        pts.push(surface(k, true));
    }
    pts.push(Vec2::ZERO);
    for k in 1..n_half {
        pts.push(surface(k, false));
    }
    pts
}

/// O-type mesh of the annulus between a NACA 4-digit wing and a circular far
/// field centered at `(0.5, 0)`.
pub fn synth_airfoil(params: &AirfoilParams) -> Result<Mesh2D> {
    let AirfoilParams { m, p, t, n_boundary: n, farfield_radius: rf, n_layers } = *params;
    if !(0.0..=0.09).contains(&m) || !(0.1..=0.9).contains(&p) {
        return Err(Error::InvalidParameter(format!("camber ({m}, {p}) outside the 4-digit range")));
    }
    if !(0.06..=0.18).contains(&t) {
        return Err(Error::InvalidParameter(format!("degenerate thickness {t}")));
    }
    if n < 8 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!("n_boundary {n} must be even and at least 8")));
    }
    if !(rf >= 5.0 && rf.is_finite()) {
        return Err(Error::InvalidParameter(format!("farfield radius {rf} below 5")));
    }
    let n_half = n / 2;
    let wing = naca4_profile(m, p, t, n_half);
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_intersect(wing[i], wing[(i + 1) % n], wing[j], wing[(j + 1) % n]) {
                return Err(Error::InvalidParameter(format!(
                    "self-intersecting profile (segments {i} and {j})"
                )));
            }
        }
    }

    let nl = n_layers.unwrap_or_else(|| {
        ((rf / 0.5).ln() * n as f64 / (2.0 * PI)).round().max(4.0) as usize
    });
    if nl < 3 {
        return Err(Error::InvalidParameter("at least three radial layers are required".into()));
    }
    // Distance of layer i from the wing, geometric from the wing scale.
    const R0: f64 = 0.5;
    let dist = |i: usize| R0 * ((rf / R0).powf(i as f64 / nl as f64) - 1.0);

    // Inner layers: march along the normals of the previous curve in small
    // substeps. Each substep is followed by smoothing passes that fill
    // concave dents and redistribute nodes tangentially but never pull
    // convex corners inward.
    const SUBSTEPS: usize = 8;
    const PASSES: usize = 4;
    let normal = |c: &[Vec2], j: usize| {
        let t = c[(j + 1) % n] - c[(j + n - 1) % n];
        t.perp_cw() * (1.0 / t.norm())
    };
    let n_march = nl.div_ceil(3);
    let mut layers = vec![wing.clone()];
    for i in 1..=n_march {
        let step = (dist(i) - dist(i - 1)) / SUBSTEPS as f64;
        let mut cur = layers[i - 1].clone();
        for _ in 0..SUBSTEPS {
            cur = (0..n).map(|j| cur[j] + normal(&cur, j) * step).collect();
            for _ in 0..PASSES {
                cur = (0..n)
                    .map(|j| {
                        let mut lap = (cur[(j + 1) % n] + cur[(j + n - 1) % n]) * 0.5 - cur[j];
                        let nrm = normal(&cur, j);
                        let out = lap.dot(nrm);
                        if out < 0.0 {
                            lap -= nrm * out;
                        }
                        cur[j] + lap * 0.5
                    })
                    .collect();
            }
        }
        layers.push(cur);
    }

    // Outer layers: polar interpolation about the mid-chord camber point
    // from the last marched layer to the far field.
    let c = Vec2::new(0.5, camber(m, p, 0.5).0);
    let inner = layers[n_march].clone();
    let unwrap = |angles: Vec<f64>| -> Vec<f64> {
        let mut out = Vec::with_capacity(angles.len());
        let mut prev = angles[0];
        out.push(prev);
        for &a in &angles[1..] {
            let d = (a - prev + PI).rem_euclid(2.0 * PI) - PI;
            prev += d;
            out.push(prev);
        }
        out
    };
    let phi = unwrap(inner.iter().map(|&q| (q - c).y.atan2((q - c).x)).collect());
    let star = phi.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] < PI)
        && phi[n - 1] < phi[0] + 2.0 * PI;
    if !star {
        return Err(Error::InvalidParameter(
            "marched layer is not star-shaped about the mid-chord camber point".into(),
        ));
    }
    let far: Vec<Vec2> = (0..n)
        .map(|j| {
            if j == 0 {
                Vec2::new(0.5 + rf, 0.0)
            } else if 2 * j == n {
                Vec2::new(0.5 - rf, 0.0)
            } else {
                let a = 2.0 * PI * j as f64 / n as f64;
                Vec2::new(0.5 + rf * a.cos(), rf * a.sin())
            }
        })
        .collect();
    let psi0 = unwrap(far.iter().map(|&q| (q - c).y.atan2((q - c).x)).collect());
    let shift = 2.0 * PI * ((phi[0] - psi0[0]) / (2.0 * PI)).round();
    for i in n_march + 1..=nl {
        if i == nl {
            layers.push(far.clone());
            break;
        }
        let tau = (i - n_march) as f64 / (nl - n_march) as f64;
        layers.push(
            (0..n)
                .map(|j| {
                    let (ra, rb) = ((inner[j] - c).norm(), (far[j] - c).norm());
                    let r = (ra.ln() * (1.0 - tau) + rb.ln() * tau).exp();
                    let a = phi[j] * (1.0 - tau) + (psi0[j] + shift) * tau;
                    c + Vec2::new(r * a.cos(), r * a.sin())
                })
                .collect(),
        );
    }
    let vertices: Vec<Vec2> = layers.into_iter().flatten().collect();
    let idx = |i: usize, j: usize| i * n + (j % n);
    let mut triangles = Vec::with_capacity(2 * nl * n);
    for i in 0..nl {
        for j in 0..n {
            let (a, b, cc, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            let split_ac = (vertices[a] - vertices[cc]).norm2() <= (vertices[b] - vertices[d]).norm2();
            if split_ac {
                triangles.push([a, b, cc]);
                triangles.push([a, cc, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, cc, d]);
            }
        }
    }
    let mut edges = Vec::with_capacity(2 * n);
    for j in 0..n {
        let tag = if j < n_half { "upper" } else { "lower" };
        edges.push((idx(0, j), idx(0, j + 1), tag.to_string()));
    }
    for j in 0..n {
        edges.push((idx(nl, j), idx(nl, j + 1), "farfield".to_string()));
    }
    let tracked = BTreeMap::from([
        ("leading_edge".to_string(), idx(0, n_half)),
        ("trailing_edge".to_string(), idx(0, 0)),
    ]);
    Mesh2D::new(vertices, triangles, edges, tracked).map_err(|e| {
        Error::InvalidParameter(format!("airfoil mesh is invalid for {params:?}: {e}"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::polygon_area;

    fn loop_area(m: &Mesh2D) -> f64 {
        m.boundary_polyline(m.vertices())
            .loops()
            .iter()
            .map(|l| polygon_area(&l.points))
            .sum()
    }

    #[test]
    fn family_parameters() {
        let r = plate_family_radii(10);
        let expect = [0.26, 0.32, 0.38, 0.44, 0.5, 0.56, 0.62, 0.68, 0.74, 0.8];
        for (a, b) in r.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(halton(1, 2), 0.5);
        assert!((halton(5, 3) - 7.0 / 9.0).abs() < 1e-15);
        let base = AirfoilParams::naca(0.0, 0.4, 0.12);
        let f = airfoil_family(5, 3, &AirfoilRanges::default(), &base);
        assert_eq!(f, airfoil_family(5, 3, &AirfoilRanges::default(), &base));
        assert_eq!(f[0], airfoil_family(1, 3, &AirfoilRanges::default(), &base)[0]);
    }

    #[test]
    fn plate_arc_vertices_on_circles() {
        let m = synth_plate(0.5, 0.1).unwrap();
        for e in m.boundary_edges() {
            let tag = m.tag_name(e.tag);
            for &v in &e.v {
                let p = m.vertices()[v];
                match tag {
                    "arc_left" => assert!(((p.x + 1.0).powi(2) + p.y * p.y - 0.25).abs() < 1e-12),
                    "arc_right" => assert!(((p.x - 1.0).powi(2) + p.y * p.y - 0.25).abs() < 1e-12),
                    _ => assert!(p.x.abs() == 1.0 || p.y.abs() == 1.0, "{p:?}"),
                }
            }
        }
        assert_eq!(m.loops().len(), 1);
        let tp = m.tracked_points();
        assert_eq!(m.vertices()[tp["top_left"]], Vec2::new(-1.0, 0.5));
        assert_eq!(m.vertices()[tp["bottom_right"]], Vec2::new(1.0, -0.5));
    }

    #[test]
    fn plate_area_matches_boundary_and_disk() {
        for r in [0.2, 0.5, 0.8] {
            let m = synth_plate(r, 0.05).unwrap();
            let a = m.area();
            assert!((a - loop_area(&m)).abs() <= 1e-12 * a);
            let nt = m.boundary_edges().iter().filter(|e| m.tag_name(e.tag) == "arc_left").count();
            // Inscribed polygon deficit: r^2 (theta - sin theta) / 2 per segment, both arcs.
            let dth = PI / nt as f64;
            let sagitta = 2.0 * nt as f64 * 0.5 * r * r * (dth - dth.sin());
            let exact = 4.0 - PI * r * r;
            assert!((a - (exact + sagitta)).abs() < 1e-12, "{r}: {a} vs {}", exact + sagitta);
        }
    }

    #[test]
    fn plate_is_deterministic_and_validates_range() {
        assert_eq!(synth_plate(0.37, 0.08).unwrap(), synth_plate(0.37, 0.08).unwrap());
        assert!(synth_plate(1.0, 0.1).is_err());
        assert!(synth_plate(0.0, 0.1).is_err());
    }

    #[test]
    fn square_notch_has_plate_tags() {
        let m = synth_square_notch_plate(0.35, 0.1).unwrap();
        let mut tags = m.tags().to_vec();
        tags.sort();
        let mut want: Vec<String> = PLATE_TAGS.iter().map(|s| s.to_string()).collect();
        want.sort();
        assert_eq!(tags, want);
        assert!((m.area() - (4.0 - 2.0 * 0.35 * 0.7)).abs() < 1e-12);
    }

    #[test]
    fn airfoil_symmetric_and_exact_edges() {
        let m = synth_airfoil(&AirfoilParams::naca(0.0, 0.4, 0.12)).unwrap();
        let x = m.vertices();
        let te = m.tracked_points()["trailing_edge"];
        let le = m.tracked_points()["leading_edge"];
        assert_eq!(x[te], Vec2::new(1.0, 0.0));
        assert_eq!(x[le], Vec2::new(0.0, 0.0));
        let wing: Vec<Vec2> = m
            .boundary_edges()
            .iter()
            .filter(|e| m.tag_name(e.tag) != "farfield")
            .map(|e| x[e.v[0]])
            .collect();
        for p in &wing {
            assert!(wing.iter().any(|q| (q.x - p.x).abs() <= 1e-12 && (q.y + p.y).abs() <= 1e-12));
        }
    }

    #[test]
    fn airfoil_positive_for_thickness_range() {
        for t in [0.06, 0.12, 0.18] {
            for m in [0.0, 0.04, 0.09] {
                for p in [0.1, 0.4, 0.9] {
                    for (n, nl) in [(80, None), (48, Some(16)), (32, Some(12))] {
                        let params = AirfoilParams { n_boundary: n, n_layers: nl, ..AirfoilParams::naca(m, p, t) };
                        let mesh = synth_airfoil(&params).unwrap_or_else(|e| panic!("{params:?}: {e}"));
                        assert!(mesh.is_valid_configuration(mesh.vertices()));
                        assert_eq!(mesh.tags(), &["upper", "lower", "farfield"]);
                    }
                }
            }
        }
        assert!(synth_airfoil(&AirfoilParams::naca(0.02, 0.4, 0.02)).is_err());
    }
}
