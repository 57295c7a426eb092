<id: required, name: required, type: default -1>
