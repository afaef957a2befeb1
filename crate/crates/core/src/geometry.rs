//! Polygonal domains and their intersection with the background grid.
//!
//! The domain boundary is split at every grid line it crosses. Each resulting piece is
//! owned by exactly one element (pieces lying on a grid line go to the element on the
//! domain side), and the pieces owned by an element are joined into chains. Inside and
//! outside regions of a cut element are obtained by walking the chains and the element
//! boundary counter-clockwise.

use std::io::BufRead;
use std::path::Path;

use crate::error::{FcmError, Result};
use crate::point::Vec2;
use crate::scalar::Real;
use crate::spline::{BackgroundGrid, TensorSplineSpace};

/// Closed, simple, counter-clockwise polygon.
#[derive(Clone, Debug)]
pub struct DomainPolygon<T> {
    vertices: Vec<Vec2<T>>,
    edges: Vec<Edge<T>>,
}

#[derive(Clone, Copy, Debug)]
struct Edge<T> {
    a: Vec2<T>,
    b: Vec2<T>,
}

impl<T: Real> Edge<T> {
    fn distance_to(&self, q: Vec2<T>) -> T {
        let d = self.b - self.a;
        let len2 = d.norm_squared();
        let t = if len2 > T::zero() {
            ((q - self.a).dot(d) / len2).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        q.distance(self.a + d * t)
    }
}

impl<T: Real> DomainPolygon<T> {
    pub fn new(mut vertices: Vec<Vec2<T>>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(FcmError::Configuration(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(FcmError::Configuration("polygon vertices must be finite".into()));
        }
        let n = vertices.len();
        let edges: Vec<Edge<T>> = (0..n).map(|i| Edge { a: vertices[i], b: vertices[(i + 1) % n] }).collect();
        if edges.iter().any(|e| e.a == e.b) {
            return Err(FcmError::Configuration("polygon has repeated consecutive vertices".into()));
        }
        let poly = Self { vertices, edges };
        if !(poly.area() > T::zero()) {
            return Err(FcmError::Configuration("polygon must be counter-clockwise (positive area)".into()));
        }
        if let Some((i, j)) = poly.find_self_intersection() {
            return Err(FcmError::Configuration(format!("polygon edges {i} and {j} intersect")));
        }
        Ok(poly)
    }

    /// Reads `x,y` rows; blank lines, `#` comments and a non-numeric header are skipped.
    pub fn from_csv_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut vertices = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let (Some(xs), Some(ys)) = (fields.next(), fields.next()) else {
                return Err(FcmError::Parse(format!("line {}: expected `x,y`", lineno + 1)));
            };
            match (xs.parse::<f64>(), ys.parse::<f64>()) {
                (Ok(x), Ok(y)) => vertices.push(Vec2::new(T::lit(x), T::lit(y))),
                _ if vertices.is_empty() && lineno == 0 => continue,
                _ => return Err(FcmError::Parse(format!("line {}: invalid number", lineno + 1))),
            }
        }
        Self::new(vertices)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn vertices(&self) -> &[Vec2<T>] {
        &self.vertices
    }

    /// Shoelace area.
    pub fn area(&self) -> T {
        let mut acc = T::zero();
        for e in &self.edges {
            acc += e.a.cross(e.b);
        }
        acc * T::lit(0.5)
    }

    pub fn perimeter(&self) -> T {
        self.edges.iter().map(|e| e.a.distance(e.b)).sum()
    }

    pub fn bbox(&self) -> (Vec2<T>, Vec2<T>) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }

    pub fn translated(&self, offset: Vec2<T>) -> Self {
        let vertices: Vec<_> = self.vertices.iter().map(|&v| v + offset).collect();
        let n = vertices.len();
        let edges = (0..n).map(|i| Edge { a: vertices[i], b: vertices[(i + 1) % n] }).collect();
        Self { vertices, edges }
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, q: Vec2<T>) -> bool {
        let mut inside = false;
        for e in &self.edges {
            if (e.a.y > q.y) != (e.b.y > q.y) {
                let x = e.a.x + (q.y - e.a.y) * (e.b.x - e.a.x) / (e.b.y - e.a.y);
                if q.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance to the boundary, negative inside.
    pub fn signed_distance(&self, q: Vec2<T>) -> T {
        let d = self
            .edges
            .iter()
            .map(|e| e.distance_to(q))
            .fold(T::infinity(), |a, b| a.min(b));
        if self.contains(q) {
            -d
        } else {
            d
        }
    }

    fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.edges.len();
        let mut order: Vec<usize> = (0..n).collect();
        let xmin = |i: usize| self.edges[i].a.x.min(self.edges[i].b.x);
        let xmax = |i: usize| self.edges[i].a.x.max(self.edges[i].b.x);
        order.sort_by(|&i, &j| xmin(i).partial_cmp(&xmin(j)).unwrap_or(std::cmp::Ordering::Equal));
        for (k, &i) in order.iter().enumerate() {
            for &j in &order[k + 1..] {
                if xmin(j) > xmax(i) {
                    break;
                }
                let adjacent = (i + 1) % n == j || (j + 1) % n == i;
                if !adjacent && segments_intersect(self.edges[i], self.edges[j]) {
                    return Some((i.min(j), i.max(j)));
                }
            }
        }
        None
    }
}

fn segments_intersect<T: Real>(s: Edge<T>, t: Edge<T>) -> bool {
    let (ylo_s, yhi_s) = (s.a.y.min(s.b.y), s.a.y.max(s.b.y));
    let (ylo_t, yhi_t) = (t.a.y.min(t.b.y), t.a.y.max(t.b.y));
    if yhi_s < ylo_t || yhi_t < ylo_s {
        return false;
    }
    let o1 = (s.b - s.a).cross(t.a - s.a);
    let o2 = (s.b - s.a).cross(t.b - s.a);
    let o3 = (t.b - t.a).cross(s.a - t.a);
    let o4 = (t.b - t.a).cross(s.b - t.a);
    let strictly = |u: T, v: T| (u > T::zero() && v < T::zero()) || (u < T::zero() && v > T::zero());
    if strictly(o1, o2) && strictly(o3, o4) {
        return true;
    }
    let on = |o: T, p: Vec2<T>, e: Edge<T>| {
        o == T::zero()
            && p.x >= e.a.x.min(e.b.x)
            && p.x <= e.a.x.max(e.b.x)
            && p.y >= e.a.y.min(e.b.y)
            && p.y <= e.a.y.max(e.b.y)
    };
    on(o1, t.a, s) || on(o2, t.b, s) || on(o3, s.a, t) || on(o4, s.b, t)
}

/// Regular CCW polygon with `n_vertices` vertices inscribed in a circle.
pub fn make_disc_polygon<T: Real>(center: Vec2<T>, radius: T, n_vertices: usize) -> Result<DomainPolygon<T>> {
    if n_vertices < 16 {
        return Err(FcmError::Configuration(format!("disc polygon needs >= 16 vertices, got {n_vertices}")));
    }
    if !(radius > T::zero()) {
        return Err(FcmError::Configuration("disc radius must be positive".into()));
    }
    let n = T::of_usize(n_vertices);
    let vertices = (0..n_vertices)
        .map(|k| {
            let theta = T::TAU() * T::of_usize(k) / n;
            center + Vec2::new(theta.cos(), theta.sin()) * radius
        })
        .collect();
    DomainPolygon::new(vertices)
}

/// Axis-aligned rectangle `[lo, hi]`.
pub fn make_rectangle<T: Real>(lo: Vec2<T>, hi: Vec2<T>) -> Result<DomainPolygon<T>> {
    DomainPolygon::new(vec![lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)])
}

/// Square rotated by 45 degrees with vertices at distance `half_diagonal` from `center`.
pub fn make_diamond<T: Real>(center: Vec2<T>, half_diagonal: T) -> Result<DomainPolygon<T>> {
    let r = half_diagonal;
    DomainPolygon::new(vec![
        center + Vec2::new(r, T::zero()),
        center + Vec2::new(T::zero(), r),
        center + Vec2::new(-r, T::zero()),
        center + Vec2::new(T::zero(), -r),
    ])
}

/// Background-grid translation `(s h, s h / 3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftSpec<T> {
    pub s: T,
    pub h: T,
}

impl<T: Real> ShiftSpec<T> {
    pub fn new(s: T, h: T) -> Result<Self> {
        if !(s >= T::zero() && s <= T::one()) {
            return Err(FcmError::Configuration(format!("shift parameter must lie in [0, 1], got {s}")));
        }
        Ok(Self { s, h })
    }

    pub fn offset(&self) -> Vec2<T> {
        Vec2::new(self.s * self.h, self.s * self.h / T::lit(3.0))
    }
}

pub fn shift_grid<T: Real>(base: &BackgroundGrid<T>, spec: ShiftSpec<T>) -> Result<BackgroundGrid<T>> {
    let spec = ShiftSpec::new(spec.s, spec.h)?;
    BackgroundGrid::new(base.origin + spec.offset(), base.h, base.nx, base.ny)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classification {
    Inside,
    Outside,
    Cut,
}

/// Straight piece of the domain boundary with its outward unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundarySegment<T> {
    pub a: Vec2<T>,
    pub b: Vec2<T>,
    pub normal: Vec2<T>,
}

impl<T: Real> BoundarySegment<T> {
    pub fn length(&self) -> T {
        self.a.distance(self.b)
    }

    /// Unit tangent in the (counter-clockwise) boundary direction.
    pub fn tangent(&self) -> Vec2<T> {
        let d = self.b - self.a;
        d * (T::one() / d.norm())
    }

    /// Tangent projector `I - n n^T` as row-major 2x2.
    pub fn tangent_projector(&self) -> [[T; 2]; 2] {
        let n = self.normal;
        [[T::one() - n.x * n.x, -n.x * n.y], [-n.y * n.x, T::one() - n.y * n.y]]
    }

    /// `(I - n n^T) v`.
    pub fn project_tangent(&self, v: Vec2<T>) -> Vec2<T> {
        v - self.normal * self.normal.dot(v)
    }
}

/// Intersection of one element with the domain.
#[derive(Clone, Debug)]
pub struct CutGeometry<T> {
    pub classification: Classification,
    /// Polygons (CCW) covering `T ∩ Ω`.
    pub inside_regions: Vec<Vec<Vec2<T>>>,
    /// Polygons (CCW) covering `T \ Ω`.
    pub outside_regions: Vec<Vec<Vec2<T>>>,
    pub boundary_chain: Vec<BoundarySegment<T>>,
}

impl<T: Real> CutGeometry<T> {
    fn full(lo: Vec2<T>, h: T, classification: Classification) -> Self {
        let square = square_polygon(lo, h);
        let (inside_regions, outside_regions) = match classification {
            Classification::Outside => (vec![], vec![square]),
            _ => (vec![square], vec![]),
        };
        Self { classification, inside_regions, outside_regions, boundary_chain: vec![] }
    }

    pub fn inside_area(&self) -> T {
        self.inside_regions.iter().map(|p| polygon_area(p)).sum()
    }

    pub fn outside_area(&self) -> T {
        self.outside_regions.iter().map(|p| polygon_area(p)).sum()
    }

    pub fn chain_length(&self) -> T {
        self.boundary_chain.iter().map(|s| s.length()).sum()
    }
}

pub fn polygon_area<T: Real>(poly: &[Vec2<T>]) -> T {
    let n = poly.len();
    let mut acc = T::zero();
    for i in 0..n {
        acc += poly[i].cross(poly[(i + 1) % n]);
    }
    acc * T::lit(0.5)
}

fn square_polygon<T: Real>(lo: Vec2<T>, h: T) -> Vec<Vec2<T>> {
    vec![lo, lo + Vec2::new(h, T::zero()), lo + Vec2::new(h, h), lo + Vec2::new(T::zero(), h)]
}

/// Per-element intersection of a grid with a domain polygon.
#[derive(Clone, Debug)]
pub struct CutMesh<T> {
    grid: BackgroundGrid<T>,
    classes: Vec<Classification>,
    cut: Vec<Option<Box<CutGeometry<T>>>>,
}

#[derive(Clone, Copy, Debug)]
struct Piece<T> {
    element: Option<usize>,
    a: Vec2<T>,
    b: Vec2<T>,
    normal: Vec2<T>,
}

struct Chain<T> {
    points: Vec<Vec2<T>>,
    closed: bool,
}

impl<T: Real> CutMesh<T> {
    pub fn new(domain: &DomainPolygon<T>, grid: &BackgroundGrid<T>) -> Result<Self> {
        let pieces = boundary_pieces(domain, grid);
        let chains = collect_chains(&pieces, grid.n_elements());

        let mut classes = vec![Classification::Outside; grid.n_elements()];
        let mut cut: Vec<Option<Box<CutGeometry<T>>>> = vec![None; grid.n_elements()];
        for (e, element_chains) in chains.into_iter().enumerate() {
            if element_chains.is_empty() {
                continue;
            }
            let lo = grid.element_lo(e);
            let (inside_regions, outside_regions) = element_regions(e, lo, grid.h, &element_chains)?;
            let boundary_chain = pieces
                .iter()
                .filter(|pc| pc.element == Some(e))
                .map(|pc| BoundarySegment { a: pc.a, b: pc.b, normal: pc.normal })
                .collect();
            classes[e] = Classification::Cut;
            cut[e] = Some(Box::new(CutGeometry {
                classification: Classification::Cut,
                inside_regions,
                outside_regions,
                boundary_chain,
            }));
        }

        // uncut elements: scanline parity test of element centers
        for iy in 0..grid.ny {
            let yc = grid.origin.y + (T::of_usize(iy) + T::lit(0.5)) * grid.h;
            let mut xs: Vec<T> = domain
                .edges
                .iter()
                .filter(|e| (e.a.y > yc) != (e.b.y > yc))
                .map(|e| e.a.x + (yc - e.a.y) * (e.b.x - e.a.x) / (e.b.y - e.a.y))
                .collect();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            for ix in 0..grid.nx {
                let e = grid.element_id(ix, iy);
                if cut[e].is_some() {
                    continue;
                }
                let xc = grid.origin.x + (T::of_usize(ix) + T::lit(0.5)) * grid.h;
                let crossings = xs.iter().filter(|&&x| x > xc).count();
                if crossings % 2 == 1 {
                    classes[e] = Classification::Inside;
                }
            }
        }
        Ok(Self { grid: grid.clone(), classes, cut })
    }

    pub fn grid(&self) -> &BackgroundGrid<T> {
        &self.grid
    }

    pub fn classification(&self, e: usize) -> Classification {
        self.classes[e]
    }

    pub fn cut_geometry(&self, e: usize) -> Option<&CutGeometry<T>> {
        self.cut[e].as_deref()
    }

    /// Geometry of element `e`, synthesized for uncut elements.
    pub fn geometry(&self, e: usize) -> CutGeometry<T> {
        match self.cut_geometry(e) {
            Some(g) => g.clone(),
            None => CutGeometry::full(self.grid.element_lo(e), self.grid.h, self.classes[e]),
        }
    }

    pub fn inside_area(&self, e: usize) -> T {
        match self.classes[e] {
            Classification::Inside => self.grid.h * self.grid.h,
            Classification::Outside => T::zero(),
            Classification::Cut => self.cut_geometry(e).map(|g| g.inside_area()).unwrap_or_default(),
        }
    }

    /// Indices of all cut elements in ascending order.
    pub fn cut_elements(&self) -> Vec<usize> {
        (0..self.classes.len()).filter(|&e| self.classes[e] == Classification::Cut).collect()
    }
}

/// Splits every polygon edge at the grid lines it crosses and assigns each piece to an element.
fn boundary_pieces<T: Real>(domain: &DomainPolygon<T>, grid: &BackgroundGrid<T>) -> Vec<Piece<T>> {
    let h = grid.h;
    let snap_tol = h * T::lit(1e-12);
    let mut pieces = Vec::new();
    for edge in &domain.edges {
        let (a, b) = (edge.a, edge.b);
        let d = b - a;
        let len = d.norm();
        let normal = d.rot_cw() * (T::one() / len);

        // (t, point) split locations; crossing points are snapped onto their grid line
        let mut splits: Vec<(T, Vec2<T>)> = vec![(T::zero(), a), (T::one(), b)];
        let mut add_crossings = |axis: usize| {
            let (pa, pb, o) = if axis == 0 { (a.x, b.x, grid.origin.x) } else { (a.y, b.y, grid.origin.y) };
            if pa == pb {
                return;
            }
            let (lo, hi) = (pa.min(pb), pa.max(pb));
            let first = ((lo - o) / h).ceil();
            let last = ((hi - o) / h).floor();
            let mut k = first;
            while k <= last {
                let line = o + k * h;
                let t = (line - pa) / (pb - pa);
                if t > T::zero() && t < T::one() {
                    let mut q = a.lerp(b, t);
                    if axis == 0 {
                        q.x = line;
                    } else {
                        q.y = line;
                    }
                    splits.push((t, q));
                }
                k += T::one();
            }
        };
        add_crossings(0);
        add_crossings(1);
        splits.sort_by(|u, v| u.0.partial_cmp(&v.0).unwrap_or(std::cmp::Ordering::Equal));

        // merge split points closer than the snapping tolerance
        let mut merged: Vec<Vec2<T>> = Vec::with_capacity(splits.len());
        let mut last_t = T::zero();
        for (i, &(t, q)) in splits.iter().enumerate() {
            if i > 0 && (t - last_t) * len <= snap_tol {
                let prev = merged.last_mut().expect("nonempty");
                if t == T::one() {
                    *prev = b;
                } else if *prev != a {
                    // two crossings at a grid node
                    *prev = snap_to_node(*prev, q, grid);
                }
                continue;
            }
            merged.push(q);
            last_t = t;
        }
        if let Some(lastp) = merged.last_mut() {
            *lastp = b;
        }

        for w in merged.windows(2) {
            let (pa, pb) = (w[0], w[1]);
            if pa == pb {
                continue;
            }
            pieces.push(Piece { element: owning_element(pa, pb, normal, grid), a: pa, b: pb, normal });
        }
    }
    pieces
}

fn snap_to_node<T: Real>(p: Vec2<T>, q: Vec2<T>, grid: &BackgroundGrid<T>) -> Vec2<T> {
    let h = grid.h;
    let node = |v: T, o: T| o + ((v - o) / h).round() * h;
    let on_x = |v: Vec2<T>| (v.x - node(v.x, grid.origin.x)).abs() <= h * T::lit(1e-12);
    let x = if on_x(p) { p.x } else { q.x };
    let on_y = |v: Vec2<T>| (v.y - node(v.y, grid.origin.y)).abs() <= h * T::lit(1e-12);
    let y = if on_y(p) { p.y } else { q.y };
    Vec2::new(x, y)
}

fn owning_element<T: Real>(a: Vec2<T>, b: Vec2<T>, normal: Vec2<T>, grid: &BackgroundGrid<T>) -> Option<usize> {
    let h = grid.h;
    let tol = T::lit(1e-12);
    let axis_index = |pa: T, pb: T, o: T, inward: T, n: usize| -> Option<usize> {
        let ga = (pa - o) / h;
        let gb = (pb - o) / h;
        let k = ga.round();
        let idx = if (ga - k).abs() <= tol && (gb - k).abs() <= tol {
            // piece runs along a grid line: owner lies on the domain side
            if inward > T::zero() {
                k
            } else {
                k - T::one()
            }
        } else {
            ((ga + gb) * T::lit(0.5)).floor()
        };
        if idx < T::zero() {
            return None;
        }
        let i = idx.to_usize()?;
        (i < n).then_some(i)
    };
    let ix = axis_index(a.x, b.x, grid.origin.x, -normal.x, grid.nx)?;
    let iy = axis_index(a.y, b.y, grid.origin.y, -normal.y, grid.ny)?;
    Some(grid.element_id(ix, iy))
}

/// Groups consecutive pieces owned by the same element into chains.
fn collect_chains<T: Real>(pieces: &[Piece<T>], n_elements: usize) -> Vec<Vec<Chain<T>>> {
    let mut out: Vec<Vec<Chain<T>>> = (0..n_elements).map(|_| Vec::new()).collect();
    let n = pieces.len();
    if n == 0 {
        return out;
    }
    // start at a run boundary so that no run wraps around
    let start = (0..n).find(|&i| pieces[i].element != pieces[(i + n - 1) % n].element);
    let Some(start) = start else {
        if let Some(e) = pieces[0].element {
            let mut points: Vec<_> = pieces.iter().map(|pc| pc.a).collect();
            points.push(pieces[0].a);
            out[e].push(Chain { points, closed: true });
        }
        return out;
    };
    let mut i = 0;
    while i < n {
        let first = (start + i) % n;
        let element = pieces[first].element;
        let mut points = vec![pieces[first].a];
        while i < n && pieces[(start + i) % n].element == element {
            points.push(pieces[(start + i) % n].b);
            i += 1;
        }
        if let Some(e) = element {
            out[e].push(Chain { points, closed: false });
        }
    }
    out
}

/// Perimeter coordinate of a point on the boundary of `[lo, lo + h]^2`, counter-clockwise
/// from the lower-left corner, and its distance to that boundary.
fn perimeter_coordinate<T: Real>(q: Vec2<T>, lo: Vec2<T>, h: T) -> (T, T) {
    let (dx0, dx1) = ((q.x - lo.x).abs(), (q.x - lo.x - h).abs());
    let (dy0, dy1) = ((q.y - lo.y).abs(), (q.y - lo.y - h).abs());
    let clamp = |v: T| v.max(T::zero()).min(h);
    let candidates = [
        (dy0, clamp(q.x - lo.x)),
        (dx1, h + clamp(q.y - lo.y)),
        (dy1, T::lit(2.0) * h + clamp(lo.x + h - q.x)),
        (dx0, T::lit(3.0) * h + clamp(lo.y + h - q.y)),
    ];
    let (dist, sigma) = candidates
        .into_iter()
        .fold((T::infinity(), T::zero()), |best, c| if c.0 < best.0 { c } else { best });
    let four_h = T::lit(4.0) * h;
    (if sigma >= four_h { sigma - four_h } else { sigma }, dist)
}

fn corner<T: Real>(lo: Vec2<T>, h: T, k: usize) -> Vec2<T> {
    match k % 4 {
        0 => lo,
        1 => lo + Vec2::new(h, T::zero()),
        2 => lo + Vec2::new(h, h),
        _ => lo + Vec2::new(T::zero(), h),
    }
}

/// Builds the inside and outside polygons of an element from its boundary chains.
fn element_regions<T: Real>(
    element: usize,
    lo: Vec2<T>,
    h: T,
    chains: &[Chain<T>],
) -> Result<(Vec<Vec<Vec2<T>>>, Vec<Vec<Vec2<T>>>)> {
    let topo = |reason: &str| FcmError::UnsupportedTopology { element, reason: reason.to_string() };
    let tol = h * T::lit(1e-9);
    let min_area = h * h * T::lit(1e-14);

    if chains.iter().any(|c| c.closed) {
        if chains.len() != 1 {
            return Err(topo("closed boundary loop together with other chains"));
        }
        let lp = &chains[0].points;
        let mut ring: Vec<Vec2<T>> = lp[..lp.len() - 1].to_vec();
        dedup_ring(&mut ring, h);
        if polygon_area(&ring) <= T::zero() {
            return Err(topo("closed clockwise loop (hole) inside element"));
        }
        let outside = bridged_complement(lo, h, &ring);
        return Ok((vec![ring], vec![outside]));
    }

    struct Ends<T> {
        sigma_in: T,
        sigma_out: T,
        loop_area: T,
    }
    let four_h = T::lit(4.0) * h;
    let mut ends = Vec::with_capacity(chains.len());
    for c in chains {
        let (si, di) = perimeter_coordinate(c.points[0], lo, h);
        let (so, dout) = perimeter_coordinate(*c.points.last().expect("chain has points"), lo, h);
        if di > tol || dout > tol {
            return Err(topo("boundary chain does not start and end on the element boundary"));
        }
        ends.push(Ends { sigma_in: si, sigma_out: so, loop_area: polygon_area(&c.points) });
    }

    // cyclic CCW distance from `from` to `to`; `own` resolves zero-length returns to the same chain
    let ccw = |from: T, to: T, own: Option<bool>| -> T {
        let mut d = to - from;
        if d < T::zero() {
            d += four_h;
        }
        if d < tol || d > four_h - tol {
            return match own {
                Some(true) | None => T::zero(),
                Some(false) => four_h,
            };
        }
        d
    };
    let walk_corners = |from: T, dist: T, out: &mut Vec<Vec2<T>>| {
        let mut cs: Vec<(T, usize)> = (0..4)
            .filter_map(|k| {
                let dk = ccw(from, T::of_usize(k) * h, None);
                let dk = if dk == T::zero() { four_h } else { dk };
                (dk > tol && dk < dist - tol).then_some((dk, k))
            })
            .collect();
        cs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        out.extend(cs.into_iter().map(|(_, k)| corner(lo, h, k)));
    };

    let trace = |forward: bool| -> Result<Vec<Vec<Vec2<T>>>> {
        let mut used = vec![false; chains.len()];
        let mut regions = Vec::new();
        while let Some(start) = used.iter().position(|u| !u) {
            let mut poly = Vec::new();
            let mut cur = start;
            for _ in 0..=chains.len() {
                used[cur] = true;
                let pts = &chains[cur].points;
                let leave = if forward {
                    poly.extend_from_slice(pts);
                    ends[cur].sigma_out
                } else {
                    poly.extend(pts.iter().rev());
                    ends[cur].sigma_in
                };
                let mut best: Option<(T, usize)> = None;
                for (k, en) in ends.iter().enumerate() {
                    let target = if forward { en.sigma_in } else { en.sigma_out };
                    let own = (k == cur).then_some((en.loop_area > T::zero()) == forward);
                    let d = ccw(leave, target, own);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, k));
                    }
                }
                let (dist, next) = best.expect("at least one chain");
                walk_corners(leave, dist, &mut poly);
                if next == start {
                    break;
                }
                if used[next] {
                    return Err(topo("inconsistent chain ordering along element boundary"));
                }
                cur = next;
            }
            dedup_ring(&mut poly, h);
            if poly.len() >= 3 && polygon_area(&poly) > min_area {
                regions.push(poly);
            }
        }
        Ok(regions)
    };

    Ok((trace(true)?, trace(false)?))
}

fn dedup_ring<T: Real>(ring: &mut Vec<Vec2<T>>, h: T) {
    let tol = h * T::lit(1e-13);
    ring.dedup_by(|a, b| a.distance(*b) <= tol);
    while ring.len() > 1 && ring[0].distance(*ring.last().expect("nonempty")) <= tol {
        ring.pop();
    }
}

/// Element square minus a CCW loop strictly inside it, as one weakly simple polygon
/// joined to the loop by a horizontal bridge.
fn bridged_complement<T: Real>(lo: Vec2<T>, h: T, ring: &[Vec2<T>]) -> Vec<Vec2<T>> {
    let (k, q) = ring
        .iter()
        .enumerate()
        .fold((0, ring[0]), |best, (i, &v)| if v.x > best.1.x { (i, v) } else { best });
    let r = Vec2::new(lo.x + h, q.y);
    let mut out = vec![r, corner(lo, h, 2), corner(lo, h, 3), corner(lo, h, 0), corner(lo, h, 1), r, q];
    let n = ring.len();
    for j in 1..n {
        out.push(ring[(k + n - j) % n]);
    }
    out.push(q);
    out
}

/// Clips a single axis-aligned square element `[lo, lo + h]^2` against the domain.
pub fn clip_element<T: Real>(domain: &DomainPolygon<T>, lo: Vec2<T>, h: T) -> Result<CutGeometry<T>> {
    let grid = BackgroundGrid::new(lo, h, 1, 1)?;
    let mesh = CutMesh::new(domain, &grid)?;
    Ok(mesh.geometry(0))
}

/// Inside, outside or cut classification of a square element.
pub fn classify_element<T: Real>(domain: &DomainPolygon<T>, lo: Vec2<T>, h: T) -> Classification {
    let Ok(grid) = BackgroundGrid::new(lo, h, 1, 1) else {
        return Classification::Outside;
    };
    if boundary_pieces(domain, &grid).iter().any(|pc| pc.element == Some(0)) {
        return Classification::Cut;
    }
    if domain.contains(grid.element_center(0)) {
        Classification::Inside
    } else {
        Classification::Outside
    }
}

/// Active cut elements and every active element sharing a vertex with one of them.
pub fn boundary_layer_elements<T: Real>(space: &TensorSplineSpace<T>, cuts: &CutMesh<T>) -> Vec<usize> {
    let grid = space.grid();
    let mut in_layer = vec![false; grid.n_elements()];
    for &e in space.active_elements() {
        if cuts.classification(e) == Classification::Cut {
            in_layer[e] = true;
            for n in grid.vertex_neighbors(e) {
                if space.is_element_active(n) {
                    in_layer[n] = true;
                }
            }
        }
    }
    (0..grid.n_elements()).filter(|&e| in_layer[e]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vec2<f64> {
        Vec2::new(x, y)
    }

    #[test]
    fn disc_area_and_perimeter() {
        let n = 4096usize;
        let disc = make_disc_polygon(v(0.0, 0.0), 1.0, n).unwrap();
        let nf = n as f64;
        let exact_area = 0.5 * nf * (2.0 * std::f64::consts::PI / nf).sin();
        assert!((disc.area() - exact_area).abs() < 1e-12);
        assert!((disc.area() - std::f64::consts::PI).abs() < 1.3e-6);
        let exact_perimeter = nf * 2.0 * (std::f64::consts::PI / nf).sin();
        assert!((disc.perimeter() - exact_perimeter).abs() < 1e-12);
        assert!((disc.perimeter() / (2.0 * std::f64::consts::PI) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn coarse_disc_rejected() {
        assert!(matches!(make_disc_polygon(v(0.0, 0.0), 1.0, 4), Err(FcmError::Configuration(_))));
    }

    #[test]
    fn clockwise_and_self_intersecting_rejected() {
        let cw = vec![v(0.0, 0.0), v(0.0, 1.0), v(1.0, 1.0), v(1.0, 0.0)];
        assert!(DomainPolygon::new(cw).is_err());
        let bowtie = vec![v(0.0, 0.0), v(1.0, 1.0), v(1.0, 0.0), v(0.0, 1.0)];
        assert!(DomainPolygon::new(bowtie).is_err());
    }

    #[test]
    fn classify_examples() {
        let disc = make_disc_polygon(v(0.0, 0.0), 1.0, 1024).unwrap();
        assert_eq!(classify_element(&disc, v(0.1, 0.1), 0.1), Classification::Inside);
        assert_eq!(classify_element(&disc, v(5.0, 5.0), 0.1), Classification::Outside);
        assert_eq!(classify_element(&disc, v(0.95, -0.05), 0.1), Classification::Cut);
    }

    #[test]
    fn half_plane_clip() {
        let h = 0.1;
        let dom = make_rectangle(v(-1.0, -1.0), v(h / 2.0, 1.0)).unwrap();
        let g = clip_element(&dom, v(0.0, 0.0), h).unwrap();
        assert_eq!(g.classification, Classification::Cut);
        assert!((g.inside_area() - h * h / 2.0).abs() < 1e-15);
        assert!((g.outside_area() - h * h / 2.0).abs() < 1e-15);
        assert_eq!(g.boundary_chain.len(), 1);
        let s = g.boundary_chain[0];
        assert!((s.length() - h).abs() < 1e-15);
        assert_eq!(s.normal, v(1.0, 0.0));
    }

    #[test]
    fn inside_element_has_no_chain() {
        let disc = make_disc_polygon(v(0.0, 0.0), 1.0, 256).unwrap();
        let g = clip_element(&disc, v(0.1, 0.1), 0.1).unwrap();
        assert_eq!(g.classification, Classification::Inside);
        assert!(g.boundary_chain.is_empty() && g.outside_regions.is_empty());
        assert!((g.inside_area() - 0.01).abs() < 1e-16);
    }

    #[test]
    fn tangent_vertex_gives_two_chains() {
        // polygon vertex pokes across the right face of element [0,1]^2
        let dom = DomainPolygon::new(vec![v(-2.0, -2.0), v(0.8, -2.0), v(1.0 + 1e-3, 0.5), v(0.8, 3.0), v(-2.0, 3.0)])
            .unwrap();
        let g = clip_element(&dom, v(0.0, 0.0), 1.0).unwrap();
        assert_eq!(g.classification, Classification::Cut);
        let total = g.inside_area() + g.outside_area();
        assert!((total - 1.0).abs() < 1e-14);
        assert_eq!(g.outside_regions.len(), 2);
        let grid = BackgroundGrid::new(v(0.0, 0.0), 1.0, 2, 1).unwrap();
        let mesh = CutMesh::new(&dom, &grid).unwrap();
        let right = mesh.cut_geometry(1).unwrap();
        assert_eq!(right.inside_regions.len(), 1);
        assert_eq!(right.inside_regions[0].len(), 3);
        let left = mesh.cut_geometry(0).unwrap();
        assert_eq!(left.boundary_chain.len(), 2);
        assert!(right.inside_area() > 0.0 && right.inside_area() < 1e-4);
    }

    #[test]
    fn area_and_length_conservation_on_disc() {
        let disc = make_disc_polygon(v(0.0, 0.0), 1.0, 4096).unwrap();
        for s in [0.0, 0.13, 0.5, 1.0] {
            let base = BackgroundGrid::covering(v(-1.0, -1.0), v(1.0, 1.0), 0.1, 3).unwrap();
            let grid = shift_grid(&base, ShiftSpec::new(s, 0.1).unwrap()).unwrap();
            let mesh = CutMesh::new(&disc, &grid).unwrap();
            let area: f64 = (0..grid.n_elements()).map(|e| mesh.inside_area(e)).sum();
            assert!((area / disc.area() - 1.0).abs() < 1e-10, "s={s}");
            let len: f64 = mesh.cut_elements().iter().map(|&e| mesh.cut_geometry(e).unwrap().chain_length()).sum();
            assert!((len / disc.perimeter() - 1.0).abs() < 1e-10, "s={s}");
            for e in mesh.cut_elements() {
                let g = mesh.cut_geometry(e).unwrap();
                assert!((g.inside_area() + g.outside_area() - 0.01).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn shift_examples() {
        let base = BackgroundGrid::new(v(0.0, 0.0), 0.1, 5, 5).unwrap();
        assert_eq!(shift_grid(&base, ShiftSpec { s: 0.0, h: 0.1 }).unwrap(), base);
        let g = shift_grid(&base, ShiftSpec { s: 1.0, h: 0.1 }).unwrap();
        assert!((g.origin.x - 0.1).abs() < 1e-16 && (g.origin.y - 0.1 / 3.0).abs() < 1e-16);
        let off = ShiftSpec::<f64>::new(0.5, 0.2).unwrap().offset();
        assert!((off.x - 0.1).abs() < 1e-16 && (off.y - 0.1 / 3.0).abs() < 1e-16);
        assert!(ShiftSpec::new(1.5, 0.1).is_err());
        assert!(shift_grid(&base, ShiftSpec { s: -0.1, h: 0.1 }).is_err());
    }

    #[test]
    fn csv_polygon() {
        let text = "x,y\n0,0\n1,0\n1,1\n# comment\n0,1\n";
        let poly = DomainPolygon::<f64>::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(poly.vertices().len(), 4);
        assert!((poly.area() - 1.0).abs() < 1e-15);
        assert!(DomainPolygon::<f64>::from_csv_reader("0,0\n1,x\n".as_bytes()).is_err());
    }

    #[test]
    fn signed_distance_sign() {
        let sq = make_rectangle(v(0.0, 0.0), v(1.0, 1.0)).unwrap();
        assert!((sq.signed_distance(v(0.5, 0.5)) + 0.5).abs() < 1e-15);
        assert!((sq.signed_distance(v(1.5, 0.5)) - 0.5).abs() < 1e-15);
    }
}
