use std::collections::BTreeMap;

use super::{check_ownership, duplicate, Atlas, AtlasError, Bounds, MapBounds, PromptStages, Result, TermRecord, TextureRecord, ATLAS_VERSION};
use crate::embedding::{EmbeddingVector, Modality, UmapModel, UmapParams};

#[derive(Clone, Debug, PartialEq)]
pub struct TermInput {
    pub term_id: String,
    pub surface: String,
    pub stages: PromptStages,
    pub text_embedding_id: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextureInput {
    pub texture_id: String,
    pub term_id: String,
    pub image_path: String,
    pub thumbnail_path: String,
    pub image_embedding_id: String,
}

/// Everything needed to build an atlas: records, the ownership table (each
/// texture's `term_id`) and the embeddings keyed by embedding id.
#[derive(Clone, Debug, Default)]
pub struct AtlasInput {
    pub terms: Vec<TermInput>,
    pub textures: Vec<TextureInput>,
    pub image_embeddings: BTreeMap<String, Vec<f32>>,
    pub text_embeddings: BTreeMap<String, Vec<f32>>,
}

/// Validates the input, fits one map per modality and assembles the atlas.
///
/// Records are sorted by id before fitting, so the result does not depend on
/// the order records arrive in.
pub fn build_atlas(input: AtlasInput, params: &UmapParams) -> Result<Atlas> {
    let AtlasInput { mut terms, mut textures, image_embeddings, text_embeddings } = input;
    terms.sort_by(|a, b| a.term_id.cmp(&b.term_id));
    textures.sort_by(|a, b| a.texture_id.cmp(&b.texture_id));

    if let Some(id) = duplicate(terms.iter().map(|t| t.term_id.as_str())) {
        return Err(AtlasError::DuplicateId(id));
    }
    if let Some(id) = duplicate(textures.iter().map(|t| t.texture_id.as_str())) {
        return Err(AtlasError::DuplicateId(id));
    }
    if let Some(t) = terms.iter().find(|t| t.surface.is_empty()) {
        return Err(AtlasError::Invariant(format!("term {} has an empty surface", t.term_id)));
    }
    check_ownership(terms.iter().map(|t| t.term_id.as_str()), textures.iter().map(|t| (t.texture_id.as_str(), t.term_id.as_str())))?;

    let text_vectors = collect(terms.iter().map(|t| (t.term_id.as_str(), t.text_embedding_id.as_str())), &text_embeddings, Modality::Text)?;
    let image_vectors = collect(textures.iter().map(|t| (t.texture_id.as_str(), t.image_embedding_id.as_str())), &image_embeddings, Modality::Image)?;

    let text_model = UmapModel::fit(&text_vectors, params).map_err(AtlasError::embedding("fitting the language map"))?;
    let image_model = UmapModel::fit(&image_vectors, params).map_err(AtlasError::embedding("fitting the image map"))?;

    let terms: Vec<TermRecord> = terms
        .into_iter()
        .zip(&text_model.coords)
        .map(|(t, &coord)| TermRecord { coord, stages: t.stages, surface: t.surface, term_id: t.term_id, text_embedding_id: t.text_embedding_id })
        .collect();
    let textures: Vec<TextureRecord> = textures
        .into_iter()
        .zip(&image_model.coords)
        .map(|(t, &coord)| TextureRecord {
            coord,
            image_embedding_id: t.image_embedding_id,
            image_path: t.image_path,
            term_id: t.term_id,
            texture_id: t.texture_id,
            thumbnail_path: t.thumbnail_path,
        })
        .collect();

    let bounds = MapBounds { image: Bounds::from_coords(&image_model.coords), text: Bounds::from_coords(&text_model.coords) };
    let atlas = Atlas {
        bounds,
        dynamic_points: Vec::new(),
        image_model,
        params: params.clone(),
        terms,
        text_model,
        textures,
        version: ATLAS_VERSION,
    };
    atlas.validate()?;
    Ok(atlas)
}

/// Looks up each record's embedding; the training id is the record id.
fn collect<'a>(
    records: impl Iterator<Item = (&'a str, &'a str)>,
    table: &BTreeMap<String, Vec<f32>>,
    modality: Modality,
) -> Result<Vec<EmbeddingVector>> {
    records
        .map(|(record_id, embedding_id)| {
            let values = table
                .get(embedding_id)
                .ok_or_else(|| AtlasError::MissingEmbedding { id: embedding_id.to_string(), modality: modality.as_str() })?;
            let v = EmbeddingVector::new(record_id, modality, values.clone());
            v.validate().map_err(AtlasError::embedding(format!("{} embedding {embedding_id}", modality.as_str())))?;
            Ok(v)
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::fixture::*;
    use super::*;

    #[test]
    fn ten_term_fixture_builds() {
        let atlas = build_atlas(input(10, 2, 1), &params()).unwrap();
        assert_eq!(atlas.terms.len(), 10);
        assert_eq!(atlas.textures.len(), 20);
        atlas.validate().unwrap();
        assert!(atlas.dynamic_points.is_empty());
        for t in &atlas.textures {
            assert!(atlas.bounds.image.contains(t.coord));
        }
    }

    #[test]
    fn orphan_texture_is_rejected() {
        let mut inp = input(10, 2, 1);
        inp.textures[0].term_id = "NOPE".into();
        assert!(matches!(build_atlas(inp, &params()), Err(AtlasError::OrphanTexture { .. })));
    }

    #[test]
    fn ownership_bounds() {
        let mut inp = input(10, 2, 1);
        inp.textures.retain(|t| t.term_id != "T03");
        assert!(matches!(build_atlas(inp, &params()), Err(AtlasError::OwnershipCount { count: 0, .. })));

        let mut inp = input(10, 2, 1);
        for x in 0..2 {
            let mut extra = inp.textures[0].clone();
            extra.texture_id = format!("X00extra{x}");
            inp.textures.push(extra);
        }
        let err = build_atlas(inp, &params()).unwrap_err();
        assert!(matches!(err, AtlasError::OwnershipCount { count: 4, .. }));
        assert!(err.to_string().contains("between 1 and 3"));
    }

    #[test]
    fn missing_embedding_names_the_id() {
        let mut inp = input(10, 2, 1);
        inp.image_embeddings.remove("img-X051");
        let err = build_atlas(inp, &params()).unwrap_err();
        assert!(err.to_string().contains("img-X051"), "{err}");
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let mut inp = input(10, 2, 1);
        inp.text_embeddings.insert("txt-T01".into(), vec![0.1; 100]);
        assert!(matches!(build_atlas(inp, &params()), Err(AtlasError::Embedding { .. })));
    }

    #[test]
    fn record_order_does_not_matter() {
        let a = build_atlas(input(10, 2, 1), &params()).unwrap();
        let mut shuffled = input(10, 2, 1);
        shuffled.terms.reverse();
        shuffled.textures.rotate_left(7);
        let b = build_atlas(shuffled, &params()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn highlight_lookups() {
        let mut inp = input(10, 2, 1);
        inp.textures.retain(|t| t.texture_id != "X041");
        let atlas = build_atlas(inp, &params()).unwrap();
        assert_eq!(atlas.highlight_for_term("T01").unwrap(), vec!["X010", "X011"]);
        assert_eq!(atlas.highlight_for_term("T04").unwrap(), vec!["X040"]);
        assert_eq!(atlas.highlight_for_texture("X010").unwrap(), "T01");
        assert!(matches!(atlas.highlight_for_term("T99"), Err(AtlasError::UnknownTerm(_))));
        assert!(matches!(atlas.highlight_for_texture("replot-00001"), Err(AtlasError::UnknownTexture(_))));
        for t in &atlas.textures {
            let owner = atlas.highlight_for_texture(&t.texture_id).unwrap();
            assert!(atlas.highlight_for_term(&owner).unwrap().contains(&t.texture_id));
        }
    }
}
