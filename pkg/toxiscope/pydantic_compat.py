# pragma: nocover
from typing import TYPE_CHECKING, Any, Dict, Type, TypeVar

import pydantic

_pydantic_major_version = int(pydantic.VERSION.split(".")[0])
IS_VERSION_1 = _pydantic_major_version == 1


BaseModelT = TypeVar("BaseModelT", bound=pydantic.BaseModel)

if TYPE_CHECKING:

    def model_fields(model: Type[pydantic.BaseModel]) -> Dict[str, Any]: ...  # noqa: E704

    def model_dump(instance: pydantic.BaseModel, **kwargs) -> Dict[str, Any]: ...  # noqa: E704

    def model_dump_jsonable(instance: pydantic.BaseModel) -> Dict[str, Any]: ...  # noqa: E704

    def model_validate(model: Type[BaseModelT], data: Any) -> BaseModelT: ...  # noqa: E704

    def to_jsonable_python(value: Any) -> Any: ...  # noqa: E704

    class BaseModel(pydantic.BaseModel): ...  # noqa: E701

    class FrozenModel(pydantic.BaseModel): ...  # noqa: E701

elif IS_VERSION_1:

    def model_fields(model: Type[pydantic.BaseModel]) -> Dict[str, Any]:
        return model.__fields__

    def model_dump(instance: pydantic.BaseModel, **kwargs) -> Dict[str, Any]:
        return instance.dict(**kwargs)

    def to_jsonable_python(value: Any) -> Any:
        import json

        from pydantic.json import pydantic_encoder

        return json.loads(json.dumps(value, default=pydantic_encoder))

    def model_dump_jsonable(instance: pydantic.BaseModel) -> Dict[str, Any]:
        return to_jsonable_python(instance.dict())

    def model_validate(model: Type[BaseModelT], data: Any) -> BaseModelT:
        return model.parse_obj(data)

    class BaseModel(pydantic.BaseModel):
        class Config:
            allow_population_by_field_name = True
            extra = pydantic.Extra.forbid

    class FrozenModel(pydantic.BaseModel):
        class Config:
            allow_population_by_field_name = True
            frozen = True

else:

    def model_fields(model: Type[pydantic.BaseModel]) -> Dict[str, Any]:
        return model.model_fields

    def model_dump(instance: pydantic.BaseModel, **kwargs) -> Dict[str, Any]:
        return instance.model_dump(**kwargs)

    def to_jsonable_python(value: Any) -> Any:
        import pydantic_core

        return pydantic_core.to_jsonable_python(value)

    def model_dump_jsonable(instance: pydantic.BaseModel) -> Dict[str, Any]:
        return instance.model_dump(mode="json")

    def model_validate(model: Type[BaseModelT], data: Any) -> BaseModelT:
        return model.model_validate(data)

    class BaseModel(pydantic.BaseModel):
        model_config = pydantic.ConfigDict(populate_by_name=True, extra="forbid")

    class FrozenModel(pydantic.BaseModel):
        model_config = pydantic.ConfigDict(populate_by_name=True, frozen=True)


__all__ = [
    "BaseModel",
    "FrozenModel",
    "IS_VERSION_1",
    "model_fields",
    "model_dump",
    "model_dump_jsonable",
    "model_validate",
    "to_jsonable_python",
]
