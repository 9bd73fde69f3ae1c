use std::path::Path;

use csnet::tasks::{nir_fixtures, RgbImage};

#[test]
fn shipped_fixtures_match_generator() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/nir");
    for (j, generated) in nir_fixtures(128).iter().enumerate() {
        let shipped = RgbImage::load(&dir.join(format!("fixture_{j}.png"))).unwrap();
        assert_eq!(shipped.to_bytes(), generated.to_bytes(), "fixture {j}");
    }
}
