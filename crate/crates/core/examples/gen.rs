use forge::samples;
fn main() {
    let items = [
        ("tetrahedron", samples::regular_tetrahedron(1.0)),
        ("cube", samples::cube(1.0)),
        ("doubly-covered-square", samples::doubly_covered_square(1.0)),
        ("doubly-covered-triangle", samples::doubly_covered_triangle(1.0, 1.0, 1.0)),
        ("two-24-gons", samples::offset_polygons(24)),
    ];
    for (name, dev) in items {
        std::fs::write(format!("data/{name}.json"), dev.to_json() + "\n").unwrap();
    }
}
