//! Rewrites the shipped reference scenario from the generator.

fn main() {
    let file = chiptrap::fixture::reference_scenario().expect("fixture generation");
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/paper-2020-srplus.json");
    std::fs::write(path, chiptrap::scenario::to_canonical_json(&file)).expect("write fixture");
    println!("wrote {path}");
}
