/// Even-odd ray casting. Points on an edge or vertex count as inside.
pub fn point_in_polygon(p: [f64; 2], polygon: &[[f64; 2]]) -> bool {
    let n = polygon.len();
    let mut inside = false;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        if on_segment(p, a, b) {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    if p == a || p == b {
        return true;
    }
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let cross = (p[0] - a[0]) * dy - (p[1] - a[1]) * dx;
    let len_sq = dx * dx + dy * dy;
    if cross.abs() > 1e-12 * len_sq.max(f64::MIN_POSITIVE) {
        return false;
    }
    let t = (p[0] - a[0]) * dx + (p[1] - a[1]) * dy;
    (0.0..=len_sq).contains(&t)
}
