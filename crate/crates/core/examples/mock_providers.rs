//! Every generative role served by the deterministic offline mocks.

use mimetic_atlas::gateway::raster::{self, TargetObject};
use mimetic_atlas::gateway::{MockSeedConfig, ProviderSet};

fn main() {
    let providers = ProviderSet::mock(MockSeedConfig::with_seed(42));
    for (role, info) in providers.describe() {
        println!("{role:<20} {} (deterministic: {})", info.name, info.deterministic);
    }

    let stages = providers.stage_prompts("Honyonyon").unwrap();
    println!("\nmaterial:    {}\nqualities:   {}\ndescription: {}\nprompt:      {}", stages.material, stages.physical_qualities, stages.english_description, stages.image_prompt);

    let textures = providers.generate_textures(&stages, 3).unwrap();
    println!("\ngenerated {} textures ({} bytes for the first)", textures.len(), textures[0].0.len());

    let vase = raster::encode(&TargetObject::Vase.render());
    let composite = providers.apply_texture(&vase, &textures[0]).unwrap();
    println!("vase composite: {} bytes", composite.0.len());

    let other = providers.generate_textures(&providers.stage_prompts("Gorogoro").unwrap(), 1).unwrap();
    let frames = providers.interpolate_video(&textures[0], &other[0]).unwrap();
    println!("video: {} frames", frames.len());

    let surface = providers.analyze_frame(&frames[7]).unwrap();
    let description = providers.describe_concept(&surface).unwrap();
    println!("frame 7 reads as {surface:?}: {description}");
    let image_vec = providers.embed_image(&frames[7]).unwrap();
    let text_vec = providers.embed_text(&description).unwrap();
    println!("embeddings: image {} dims, text {} dims", image_vec.len(), text_vec.len());
}
