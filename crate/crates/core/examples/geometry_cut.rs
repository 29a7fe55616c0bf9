// Classifies the background triangles against one ellipse and compares the
// cut quadrature area with the exact ellipse area.

use cutrom::error::Result;
use cutrom::geometry::{build_background_mesh, build_cut_geometry, BoxDomain, ElementClass, ParameterPoint};

pub fn run() -> Result<()> {
    let mu = ParameterPoint::new(1.1, 1.05)?;
    for h in [0.125, 0.0625] {
        let mesh = build_background_mesh(BoxDomain::square(-1.2, 1.2), h)?;
        let geom = build_cut_geometry(&mesh, mu);
        let exact = mu.ellipse_area();
        println!(
            "h = {:.4}: {} inside, {} cut, {} outside, {} ghost facets",
            mesh.h,
            geom.count(ElementClass::Inside),
            geom.count(ElementClass::Cut),
            geom.count(ElementClass::Outside),
            geom.ghost_facets.len()
        );
        println!(
            "  area {:.6} (exact {:.6}, rel. error {:.2e}), perimeter {:.6}",
            geom.area(),
            exact,
            (geom.area() - exact).abs() / exact,
            geom.perimeter()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
