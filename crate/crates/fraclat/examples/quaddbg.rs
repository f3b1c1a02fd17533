// debug scratch
use fraclat::geom::Coord;
use fraclat::quad::*;

fn main() {
    let f = |x: &Coord| x[0] * x[0] * x[0] * x[0];
    let no_probe = |_: &Coord, _: &Coord| -> Option<f64> { None };
    // Single triangle (0,0),(1,0),(1,1): exact int x^4 = 1/5 * ... compute:
    // int_0^1 x^4 * x dx = 1/6.
    let verts = vec![
        Coord::from_slice(&[0.0, 0.0]),
        Coord::from_slice(&[1.0, 0.0]),
        Coord::from_slice(&[1.0, 1.0]),
    ];
    for cap in [4, 8, 12, 16] {
        // tiny budget forces refinement to the cap everywhere
        let r = integrate_simplex(&f, &no_probe, &verts, 1e-300, cap);
        println!("cap={cap} value={} true_err={:.3e} evals={}", r.value, (r.value - 1.0/6.0).abs(), r.evals);
    }
}
