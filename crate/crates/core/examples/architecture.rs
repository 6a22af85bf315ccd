//! Layer and parameter counts of the default networks.

use vsrgan::{Discriminator, DiscriminatorConfig, FeatureNet, FeatureNetSpec, Generator, GeneratorConfig, Network};

fn main() -> vsrgan::Result<()> {
    let g = Generator::new(GeneratorConfig::default(), 0)?;
    println!(
        "generator: {} convolutions, {} residual blocks, {} parameters",
        g.conv_count(),
        g.num_res_blocks(),
        g.param_count()
    );
    for blocks in [0, 1, 5, 15] {
        let g = Generator::new(GeneratorConfig { num_res_blocks: blocks, ..Default::default() }, 0)?;
        println!("  {blocks:>2} blocks -> {:>9} parameters", g.param_count());
    }
    let d = Discriminator::new(DiscriminatorConfig::default(), 0)?;
    println!(
        "discriminator: spatial sizes {:?}, {} parameters",
        d.config().spatial_sizes(),
        d.param_count()
    );
    let f = FeatureNet::new(FeatureNetSpec::default())?;
    println!("feature net: {} parameters", f.param_count());
    Ok(())
}
