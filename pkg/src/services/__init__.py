"""Services module: persistence of runs and stages."""

from typing import Any, Dict, List, Optional, Protocol

from construction.shear import StageParams
from verification.reports import VerificationReport


class StageStore(Protocol):
    """Protocol for run storage implementations."""

    def save_config(self, config: Dict[str, Any]) -> None:
        """Write the fully resolved run configuration.

        Raises:
            StoreError: If the file cannot be written
        """
        ...

    def load_config(self) -> Dict[str, Any]:
        ...

    def manifest(self) -> Dict[str, Any]:
        """Return the manifest document; a run without one has an empty stage list."""
        ...

    def save_stage(self, stage: StageParams, report: Optional[VerificationReport] = None) -> None:
        """Persist one stage and its embedded verification report, updating the manifest.

        Args:
            stage: The stage parameters, complete or not
            report: Report of the transition from this stage to the next, if verified
        """
        ...

    def load_stages(self) -> List[StageParams]:
        """Return the stages listed in the manifest, in order.

        Raises:
            StoreError: If a listed file is missing or corrupt; the message names the file
        """
        ...

    def load_reports(self) -> List[Optional[VerificationReport]]:
        ...

    def mark_partial(self, property_id: str, message: str, counterexample: Any = None) -> None:
        ...

    def partial(self) -> Optional[Dict[str, Any]]:
        ...
