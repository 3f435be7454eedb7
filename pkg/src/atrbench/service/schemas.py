"""Request bodies of the session API."""

from pydantic import BaseModel, Field

from ..frames import CLASS_NAMES


class AnnotationIn(BaseModel):
    class_id: str = Field(alias="class")
    bbox: list[float] = Field(min_length=4, max_length=4)

    model_config = {"populate_by_name": True}

    def validated(self):
        if self.class_id not in CLASS_NAMES:
            raise ValueError(f"unknown class {self.class_id!r}")
        x, y, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise ValueError(f"degenerate bbox {self.bbox}")
        return self


class CreateSessionRequest(BaseModel):
    mission_id: str
    policy: str = "none,sliding_window"
    seed: int = 0


class LabelSubmission(BaseModel):
    annotations: list[AnnotationIn] = Field(default_factory=list)
