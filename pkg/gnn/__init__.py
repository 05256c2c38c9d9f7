# Graph layers and recurrent cells
