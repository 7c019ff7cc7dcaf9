//! Finds the j = 0 / j = 2 equal-population intensity for a 100 fs pulse and
//! scans the two-pulse interferogram of a 20 K ensemble at that intensity.

use rotramsey::dynamics::PropagationSettings;
use rotramsey::ensemble::InitialDistribution;
use rotramsey::interferometry::{scan_interferogram, visibility, DelayGrid};
use rotramsey::landscape::equal_population_intensity;
use rotramsey::pulse::PulseSpec;
use rotramsey::rotor::MolecularParams;

fn main() -> rotramsey::Result<()> {
    let params = MolecularParams::mgh_plus();
    let settings = PropagationSettings::default();

    let (i_star, pops) = equal_population_intensity(&params, 20, 100.0, 0, 2, 1e12, 1.5e13, &settings)?;
    println!("I* = {i_star:.4e} W/cm^2: p0 = {:.4}, p2 = {:.4}, p4 = {:.4}", pops[0], pops[2], pops[4]);

    let pulse = PulseSpec::from_lab(i_star, 100.0)?;
    let dist = InitialDistribution::thermal(20.0, &params, 8)?;
    let grid = DelayGrid::from_fs(1000.0, 3700.0, 10.0)?;
    let ig = scan_interferogram(&dist, &params, 20, &pulse, &pulse, &grid, &settings, false)?;
    for j in [0, 1, 2] {
        println!("V{j} = {:.4}", visibility(&ig, j, None)?);
    }
    Ok(())
}
