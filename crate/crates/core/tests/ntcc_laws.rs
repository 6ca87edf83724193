mod common;

#[test]
fn ntcc_laws() {
    let summary = common::checks::ntcc_laws().unwrap_or_else(|e| panic!("{e}"));
    println!("{summary}");
}
