use semifunc::error::Error;
use semifunc::functional_data::{Curve, CurveSet, Grid};
use semifunc::io::*;

#[test]
fn files_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::new(11).unwrap();
    let curves = CurveSet::from_curves(&[
        Curve::from_fn(grid, |t| (3.0 * t).sin() / 7.0).unwrap(),
        Curve::from_fn(grid, |t| 1.0 / 3.0 - t * t).unwrap(),
    ])
    .unwrap();
    let z = vec![vec![0.1, 1.0 / 3.0], vec![0.7, -2.5e-12]];
    let y = vec![std::f64::consts::PI, -1e300];
    let (pc, pz, py) = (
        dir.path().join("x.csv"),
        dir.path().join("z.csv"),
        dir.path().join("y.csv"),
    );
    write_curves(&pc, &curves).unwrap();
    write_covariates(&pz, &z).unwrap();
    write_responses(&py, &y).unwrap();
    let back = read_curves(&pc).unwrap();
    assert_eq!(back.grid(), grid);
    assert_eq!(back.matrix(), curves.matrix());
    assert_eq!(read_covariates(&pz).unwrap(), z);
    assert_eq!(read_responses(&py).unwrap(), y);
}

#[test]
fn comments_and_blank_lines_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("y.csv");
    std::fs::write(&p, "# responses\n1.5\n\n  -2 \n# trailing\n").unwrap();
    assert_eq!(read_responses(&p).unwrap(), vec![1.5, -2.0]);
}

fn schema_error(
    contents: &str,
    reader: fn(&std::path::Path) -> semifunc::error::Result<()>,
) -> (usize, Option<usize>) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, contents).unwrap();
    match reader(&p) {
        Err(Error::Schema {
            row, column, path, ..
        }) => {
            assert!(path.ends_with("bad.csv"));
            (row, column)
        }
        other => panic!("expected schema error, got {other:?}"),
    }
}

#[test]
fn malformed_files_name_row_and_column() {
    let responses = |p: &std::path::Path| read_responses(p).map(|_| ());
    let covariates = |p: &std::path::Path| read_covariates(p).map(|_| ());
    let curves = |p: &std::path::Path| read_curves(p).map(|_| ());
    assert_eq!(schema_error("1\n2\nabc\n", responses), (3, Some(1)));
    assert_eq!(schema_error("1,2\n3\n", covariates), (2, None));
    assert_eq!(schema_error("1,2\n3,inf\n", covariates), (2, Some(2)));
    assert_eq!(schema_error("0,0.5,1\n1,2\n", curves).0, 2);
    assert_eq!(schema_error("0,0.4,1\n1,2,3\n", curves).0, 1);
    assert_eq!(schema_error("0,1\n1,2\n", curves).0, 1);
    assert_eq!(schema_error("# nothing\n", responses).0, 1);
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = read_responses(dir.path().join("absent.csv")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("absent.csv"));
}

#[test]
fn row_count_mismatch_names_both_files() {
    let (x, z, y) = (
        std::path::Path::new("curves.csv"),
        std::path::Path::new("z.csv"),
        std::path::Path::new("y.csv"),
    );
    assert!(check_row_counts([(x, 5), (z, 5), (y, 5)]).is_ok());
    let msg = check_row_counts([(x, 5), (z, 5), (y, 4)])
        .unwrap_err()
        .to_string();
    assert!(msg.contains("curves.csv") && msg.contains("y.csv"), "{msg}");
}
