//! Regenerates the bundled demo map: `cargo run --example make_demo_map`.

use roadfuzz::network::{grid, DEMO_TOWN};

fn main() {
    let net = grid::build_grid_town(DEMO_TOWN, 4, 100.0);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/maps/Town01-lite.json");
    std::fs::write(path, net.to_json()).expect("write map");
    println!(
        "wrote {path} ({} lanes, {} junctions)",
        net.lanes.len(),
        net.junctions.len()
    );
}
