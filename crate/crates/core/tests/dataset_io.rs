use std::fs;

use dmimo::dataset::{generate_synthetic_dataset, read_dataset, write_dataset, GridSpec, CSI_FILE};
use dmimo::geometry::{AmplitudeModel, ArrayGeometry, LosChannelParams};
use dmimo::ErrorClass;

#[test]
fn full_testbed_grid_round_trips() {
    let geometry = ArrayGeometry::default_testbed();
    let spec = GridSpec {
        x: [0.3, 5.7],
        y: [0.3, 5.7],
        nx: 20,
        ny: 20,
        z: 0.0,
    };
    let params = LosChannelParams::new(geometry.wavelength(), AmplitudeModel::FreeSpace);
    let (mut grid, manifest, _) = generate_synthetic_dataset(&geometry, &spec, 4, &params, Some(3)).unwrap();
    grid.set(3, 63, 399, None);
    grid.set(0, 0, 0, None);

    let dir = tempfile::tempdir().unwrap();
    write_dataset(&grid, &manifest, dir.path()).unwrap();
    let rows = fs::read_to_string(dir.path().join(CSI_FILE)).unwrap().lines().count();
    assert_eq!(rows, 1 + 4 * 64 * 400 - 2);

    let (back, back_manifest) = read_dataset(dir.path()).unwrap();
    assert_eq!(back_manifest, manifest);
    assert_eq!(back, grid);
    assert_eq!(back.get(3, 63, 399), None);
    assert_eq!(back_manifest.geometry().unwrap(), geometry);
}

#[test]
fn truncated_csv_is_a_data_error() {
    let geometry = ArrayGeometry::default_testbed();
    let spec = GridSpec {
        x: [1.0, 2.0],
        y: [1.0, 2.0],
        nx: 2,
        ny: 2,
        z: 0.0,
    };
    let params = LosChannelParams::new(geometry.wavelength(), AmplitudeModel::UnitMagnitude);
    let (grid, manifest, _) = generate_synthetic_dataset(&geometry, &spec, 1, &params, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&grid, &manifest, dir.path()).unwrap();
    let path = dir.path().join(CSI_FILE);
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text + "0,1,0,0,1.0\n").unwrap();
    let err = read_dataset(dir.path()).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Data, "{err}");
}
