Jsonable = str | int | float | None | bool | list["Jsonable"] | dict[str, "Jsonable"]
