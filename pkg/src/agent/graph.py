"""LangGraph workflow definition for the divas pipeline."""

import logging
from typing import List, Tuple

from langgraph.graph import END, StateGraph

from ..core.config import RunConfig
from .nodes import PipelineNodes
from .state import ErrorRecord, PipelineState

logger = logging.getLogger(__name__)

STAGES: List[Tuple[str, str]] = [
    ("ingest_blocks", "ingest_blocks_node"),
    ("extract_signals", "extract_signals_node"),
    ("bootstrap_blocks", "bootstrap_blocks_node"),
    ("search_joint_structure", "search_joint_structure_node"),
    ("reconstruct_blocks", "reconstruct_blocks_node"),
    ("assemble_diagnostics", "assemble_diagnostics_node"),
]


class DivasPipeline:
    """LangGraph workflow from raw blocks to the diagnostics report."""

    def __init__(self):
        """Initialize the graph."""
        self.nodes = PipelineNodes()
        self.graph = self._build_graph()

    def _build_graph(self) -> StateGraph:
        """Build the LangGraph workflow."""
        workflow = StateGraph(PipelineState)

        # Add nodes
        for name, method in STAGES:
            workflow.add_node(name, getattr(self.nodes, method))

        workflow.set_entry_point(STAGES[0][0])

        # Every stage either hands over to the next one or ends on error
        for (name, _), (following, _) in zip(STAGES, STAGES[1:]):
            workflow.add_conditional_edges(
                name,
                self.nodes.route_after_stage,
                {"continue": following, "error": END},
            )
        workflow.add_edge(STAGES[-1][0], END)

        return workflow

    def compile(self):
        """Compile the graph for execution."""
        return self.graph.compile()

    def run(self, config: RunConfig) -> PipelineState:
        """Run the complete workflow."""
        try:
            app = self.compile()
            final_state = app.invoke(PipelineState(config=config))
            return PipelineState.model_validate(final_state)
        except Exception as e:
            logger.exception("Pipeline execution failed")
            return PipelineState(
                config=config,
                error=ErrorRecord.from_exception(e, stage="graph"),
                processing_complete=True,
            )

    def get_graph_visualization(self) -> str:
        """Get a text representation of the graph structure."""
        lines = ["[START]"]
        for name, method in STAGES:
            doc = (getattr(self.nodes, method).__doc__ or "").strip()
            lines.append(f"  -> {name:<24} {doc}")
        lines.append("[END]  (any stage routes to END on error)")
        return "\n".join(lines)
