//! Extraction, triangulation and localization chained together.

use std::time::Instant;

use crate::error::{Result, Stage};
use crate::geometry::{PointCloud3, RigidTransform2D};
use crate::graph::DTGraph;
use crate::matching::{localize, LocalizationResult, MapIndex, MatchParams};
use crate::trunk::{extract_trunk_map, TrunkExtractionParams, TrunkMap};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PipelineParams {
    pub extraction: TrunkExtractionParams,
    pub matching: MatchParams,
}

/// Wall-clock seconds per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PipelineTimings {
    pub extract: f64,
    pub triangulate: f64,
    pub localize: f64,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub trunks: TrunkMap,
    pub local_graph: DTGraph,
    pub result: LocalizationResult,
    pub timings: PipelineTimings,
}

/// Extracts trunks from `cloud`, triangulates them and localizes the result
/// in `map`. Errors carry the stage they came from.
pub fn run_pipeline(
    cloud: &PointCloud3,
    map: &MapIndex,
    params: &PipelineParams,
    initial: Option<&RigidTransform2D>,
) -> Result<PipelineOutput> {
    let clock = Instant::now();
    let trunks = extract_trunk_map(cloud, &params.extraction).map_err(|e| e.at(Stage::Extract))?;
    let extract = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let local_graph = DTGraph::triangulate(&trunks).map_err(|e| e.at(Stage::Triangulate))?;
    let triangulate = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let result = localize(&local_graph, map, &params.matching, initial).map_err(|e| e.at(Stage::Localize))?;
    let localize = clock.elapsed().as_secs_f64();

    Ok(PipelineOutput {
        trunks,
        local_graph,
        result,
        timings: PipelineTimings {
            extract,
            triangulate,
            localize,
        },
    })
}
